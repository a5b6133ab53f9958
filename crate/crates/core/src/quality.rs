//! Region geometry over the parameter space.
//!
//! A threshold configuration induces an axis-aligned region: along a
//! quality-increasing axis a point must satisfy `P >= Th`, along a
//! quality-decreasing axis `P <= Th`. Points inside (boundary included) are
//! high quality (HQ, coded `Q = 0`); everything else is low quality (LQ, `Q = 1`).

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetError, Direction, ParameterSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quality {
    #[serde(rename = "HQ")]
    High,
    #[serde(rename = "LQ")]
    Low,
}

impl Quality {
    /// Modeling code: 0 for HQ, 1 for LQ.
    pub fn code(self) -> u8 {
        match self {
            Quality::High => 0,
            Quality::Low => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quality::High => "HQ",
            Quality::Low => "LQ",
        }
    }
}

/// One threshold per axis, in native units. Serializes as a bare JSON array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThresholdConfig(pub Vec<f64>);

impl ThresholdConfig {
    pub fn new(thresholds: Vec<f64>) -> Self {
        ThresholdConfig(thresholds)
    }

    /// Checks dimension and that every threshold lies inside its axis range.
    pub fn validated(thresholds: Vec<f64>, space: &ParameterSpace) -> Result<Self, DatasetError> {
        space.check_dim(thresholds.len())?;
        for (th, axis) in thresholds.iter().zip(space.axes()) {
            if !th.is_finite() || *th < axis.min || *th > axis.max {
                return Err(DatasetError::InvalidValue {
                    row: 0,
                    column: axis.name.clone(),
                    message: format!("threshold {th} outside [{}, {}]", axis.min, axis.max),
                });
            }
        }
        Ok(ThresholdConfig(thresholds))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::fmt::Display for ThresholdConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

fn check_dims(point: &[f64], config: &ThresholdConfig, space: &ParameterSpace) -> Result<(), DatasetError> {
    space.check_dim(point.len())?;
    space.check_dim(config.dim())
}

/// Signed per-axis violation, scaled: positive when the constraint is broken.
fn axis_violation(value: f64, threshold: f64, direction: Direction, scale: f64) -> f64 {
    match direction {
        Direction::QualityIncreasing => (threshold - value) / scale,
        Direction::QualityDecreasing => (value - threshold) / scale,
    }
}

pub fn label_quality(point: &[f64], config: &ThresholdConfig, space: &ParameterSpace) -> Result<Quality, DatasetError> {
    check_dims(point, config, space)?;
    let inside = point
        .iter()
        .zip(config.values())
        .zip(space.axes())
        .all(|((&p, &th), axis)| match axis.direction {
            Direction::QualityIncreasing => p >= th,
            Direction::QualityDecreasing => p <= th,
        });
    Ok(if inside { Quality::High } else { Quality::Low })
}

/// Max-norm signed distance to the region: negative inside, zero on the
/// boundary, positive outside.
pub fn signed_distance(point: &[f64], config: &ThresholdConfig, space: &ParameterSpace) -> Result<f64, DatasetError> {
    check_dims(point, config, space)?;
    Ok(point
        .iter()
        .zip(config.values())
        .zip(space.axes())
        .map(|((&p, &th), axis)| axis_violation(p, th, axis.direction, axis.scale))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Whether `point` is HQ under at least one configuration of `layer`.
pub fn region_union_membership(
    point: &[f64],
    layer: &[ThresholdConfig],
    space: &ParameterSpace,
) -> Result<bool, DatasetError> {
    if layer.is_empty() {
        return Err(DatasetError::InvalidValue {
            row: 0,
            column: "layer".into(),
            message: "empty layer".into(),
        });
    }
    let mut any = false;
    for config in layer {
        any |= label_quality(point, config, space)? == Quality::High;
    }
    Ok(any)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::ct_space;
    use crate::dataset::Axis;
    use proptest::prelude::*;

    fn th() -> ThresholdConfig {
        ThresholdConfig::new(vec![200.0, 1.5, 1.25])
    }

    #[test]
    fn labels() {
        let space = ct_space();
        assert_eq!(label_quality(&[250.0, 1.0, 1.0], &th(), &space).unwrap(), Quality::High);
        assert_eq!(label_quality(&[150.0, 1.0, 1.0], &th(), &space).unwrap(), Quality::Low);
        assert_eq!(
            label_quality(&[200.0, 1.5, 1.25], &th(), &space).unwrap(),
            Quality::High
        );
        assert_eq!(Quality::High.code(), 0);
        assert_eq!(Quality::Low.code(), 1);
    }

    #[test]
    fn distances() {
        let space = ct_space();
        assert_eq!(signed_distance(&[100.0, 1.5, 1.25], &th(), &space).unwrap(), 1.0);
        assert_eq!(signed_distance(&[400.0, 1.0, 0.5], &th(), &space).unwrap(), -0.5);
        assert_eq!(signed_distance(&[200.0, 1.5, 1.25], &th(), &space).unwrap(), 0.0);
        assert_eq!(signed_distance(&[300.0, 1.5, 1.0], &th(), &space).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let space = ct_space();
        assert!(matches!(
            label_quality(&[1.0, 2.0], &th(), &space),
            Err(DatasetError::DimensionMismatch { .. })
        ));
        assert!(signed_distance(&[1.0, 2.0, 3.0, 4.0], &th(), &space).is_err());
        assert!(region_union_membership(&[1.0], &[th()], &space).is_err());
    }

    #[test]
    fn union_semantics() {
        let space = ct_space();
        let a = ThresholdConfig::new(vec![300.0, 1.2, 1.0]);
        let b = ThresholdConfig::new(vec![200.0, 1.0, 1.25]);
        // HQ under b only.
        let p = [250.0, 0.9, 1.2];
        assert_eq!(label_quality(&p, &a, &space).unwrap(), Quality::Low);
        assert!(region_union_membership(&p, &[a.clone(), b.clone()], &space).unwrap());
        assert!(!region_union_membership(&[100.0, 1.5, 5.0], &[a.clone(), b], &space).unwrap());
        let single = region_union_membership(&[350.0, 1.0, 1.0], &[a.clone()], &space).unwrap();
        assert_eq!(
            single,
            label_quality(&[350.0, 1.0, 1.0], &a, &space).unwrap() == Quality::High
        );
        assert!(region_union_membership(&p, &[], &space).is_err());
    }

    #[test]
    fn config_serializes_as_array() {
        assert_eq!(serde_json::to_string(&th()).unwrap(), "[200.0,1.5,1.25]");
        let back: ThresholdConfig = serde_json::from_str("[200, 1.5, 1.25]").unwrap();
        assert_eq!(back, th());
        assert!(ThresholdConfig::validated(vec![900.0, 1.0, 1.0], &ct_space()).is_err());
        assert!(ThresholdConfig::validated(vec![200.0, 1.0], &ct_space()).is_err());
    }

    fn point_and_config() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            (50.0f64..=800.0, 0.3f64..=1.5, 0.5f64..=5.0),
            (50.0f64..=800.0, 0.3f64..=1.5, 0.5f64..=5.0),
        )
            .prop_map(|(p, t)| (vec![p.0, p.1, p.2], vec![t.0, t.1, t.2]))
    }

    proptest! {
        #[test]
        fn label_consistent_with_distance((p, t) in point_and_config()) {
            let space = ct_space();
            let cfg = ThresholdConfig::new(t);
            let hq = label_quality(&p, &cfg, &space).unwrap() == Quality::High;
            prop_assert_eq!(hq, signed_distance(&p, &cfg, &space).unwrap() <= 0.0);
        }

        #[test]
        fn tightening_never_creates_hq((p, t) in point_and_config(), axis in 0usize..3, step in 0.0f64..100.0) {
            let space = ct_space();
            let before = label_quality(&p, &ThresholdConfig::new(t.clone()), &space).unwrap();
            let mut tight = t;
            match space.axes()[axis].direction {
                Direction::QualityIncreasing => tight[axis] += step,
                Direction::QualityDecreasing => tight[axis] -= step,
            }
            let after = label_quality(&p, &ThresholdConfig::new(tight), &space).unwrap();
            prop_assert!(!(before == Quality::Low && after == Quality::High));
        }

        #[test]
        fn adding_to_layer_keeps_membership((p, t) in point_and_config(), (_, u) in point_and_config()) {
            let space = ct_space();
            let one = region_union_membership(&p, &[ThresholdConfig::new(t.clone())], &space).unwrap();
            let two = region_union_membership(&p, &[ThresholdConfig::new(t), ThresholdConfig::new(u)], &space).unwrap();
            prop_assert!(!one || two);
        }

        #[test]
        fn scale_equivariance((p, t) in point_and_config(), factor in 0.125f64..8.0) {
            let space = ct_space();
            let d = signed_distance(&p, &ThresholdConfig::new(t.clone()), &space).unwrap();
            // Multiply the XRay axis, its range and its scale by the same factor.
            let axes: Vec<Axis> = space.axes().iter().enumerate().map(|(j, a)| {
                if j == 0 {
                    Axis::new(a.name.clone(), a.min * factor, a.max * factor, a.bins, a.direction).with_scale(a.scale * factor)
                } else { a.clone() }
            }).collect();
            let scaled = ParameterSpace::new(axes).unwrap();
            let (mut p2, mut t2) = (p, t);
            p2[0] *= factor;
            t2[0] *= factor;
            let d2 = signed_distance(&p2, &ThresholdConfig::new(t2), &scaled).unwrap();
            prop_assert!((d - d2).abs() <= 1e-12, "{} vs {}", d, d2);
        }
    }
}
