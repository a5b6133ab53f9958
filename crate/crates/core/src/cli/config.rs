//! Run configuration shared by the analysis commands.

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dataset::{LoadOptions, ParameterSpace, RangeMode};
use crate::pareto::Constraint;
use crate::quality::ThresholdConfig;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_alpha() -> f64 {
    0.05
}

fn default_threshold() -> f64 {
    0.5
}

fn default_min_group() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for DecayGrid {
    fn default() -> Self {
        DecayGrid {
            min: -2.0,
            max: 2.0,
            points: 81,
        }
    }
}

impl DecayGrid {
    pub fn values(&self) -> Vec<f64> {
        crate::pareto::axis_grid(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub space: ParameterSpace,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_threshold")]
    pub decision_threshold: f64,
    /// Overrides the bin count of every axis.
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default = "default_min_group")]
    pub min_group: usize,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    /// Defaults to the method with the highest pooled balanced accuracy.
    #[serde(default)]
    pub reference_method: Option<String>,
    /// Clamp out-of-range parameters instead of rejecting them.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub benjamini_hochberg: bool,
    #[serde(default)]
    pub firth: bool,
    #[serde(default)]
    pub reverse_dominance: bool,
    #[serde(default)]
    pub decay_grid: DecayGrid,
}

impl RunConfig {
    pub fn new(space: ParameterSpace) -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            space,
            alpha: default_alpha(),
            decision_threshold: default_threshold(),
            bins: None,
            min_group: default_min_group(),
            constraints: Vec::new(),
            reference_method: None,
            lenient: false,
            benjamini_hochberg: false,
            firth: false,
            reverse_dominance: false,
            decay_grid: DecayGrid::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Input(format!("InvalidConfig: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let invalid = |m: String| Err(CliError::Input(format!("InvalidConfig: {m}")));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return invalid(format!("decision_threshold {} outside (0, 1)", self.decision_threshold));
        }
        if matches!(self.bins, Some(b) if b < 2) {
            return invalid("bins must be >= 2".into());
        }
        if self.min_group == 0 {
            return invalid("min_group must be positive".into());
        }
        if self.decay_grid.points < 2 || !(self.decay_grid.min < self.decay_grid.max) {
            return invalid("decay_grid needs min < max and at least 2 points".into());
        }
        for c in &self.constraints {
            if self.space.axis_index(&c.axis).is_none() {
                return invalid(format!("constraint on unknown axis {}", c.axis));
            }
        }
        Ok(())
    }

    /// The space with the configured bin override applied.
    pub fn grid_space(&self) -> Result<ParameterSpace, CliError> {
        match self.bins {
            Some(b) => Ok(self.space.clone().with_bins(b)?),
            None => Ok(self.space.clone()),
        }
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            decision_threshold: self.decision_threshold,
            range_mode: if self.lenient {
                RangeMode::Lenient
            } else {
                RangeMode::Strict
            },
        }
    }
}

/// A region file is either a bare threshold array or `{"thresholds": [...]}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RegionFile {
    Bare(ThresholdConfig),
    Wrapped { thresholds: ThresholdConfig },
}

pub fn parse_region(text: &str, space: &ParameterSpace) -> Result<ThresholdConfig, CliError> {
    let region: RegionFile = serde_json::from_str(text).map_err(|e| CliError::Input(format!("InvalidRegion: {e}")))?;
    let config = match region {
        RegionFile::Bare(c) | RegionFile::Wrapped { thresholds: c } => c,
    };
    Ok(ThresholdConfig::validated(config.0, space)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPACE: &str = r#"{"axes": [
        {"name": "XRay", "min": 50, "max": 800, "direction": "quality_increasing"},
        {"name": "SliceTh", "min": 0.5, "max": 5, "direction": "quality_decreasing"}
    ]}"#;

    #[test]
    fn defaults() {
        let cfg = RunConfig::from_json(&format!(r#"{{"space": {SPACE}}}"#)).unwrap();
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.decision_threshold, 0.5);
        assert_eq!(cfg.min_group, 10);
        assert_eq!(cfg.space.axes()[0].bins, 10);
        assert_eq!(cfg.space.axes()[0].scale, 100.0);
        assert_eq!(cfg.space.axes()[1].scale, 1.0);
    }

    #[test]
    fn rejects_invalid() {
        for extra in [
            r#""alpha": 1.0"#,
            r#""decision_threshold": 0"#,
            r#""bins": 1"#,
            r#""schema_version": 2"#,
            r#""constraints": [{"axis": "kVp", "op": "le", "value": 1}]"#,
            r#""unknown_field": 3"#,
        ] {
            let text = format!(r#"{{"space": {SPACE}, {extra}}}"#);
            assert!(
                matches!(RunConfig::from_json(&text), Err(CliError::Input(_))),
                "{extra}"
            );
        }
    }

    #[test]
    fn region_forms() {
        let cfg = RunConfig::from_json(&format!(r#"{{"space": {SPACE}}}"#)).unwrap();
        let a = parse_region("[300, 1.0]", &cfg.space).unwrap();
        let b = parse_region(r#"{"thresholds": [300, 1.0]}"#, &cfg.space).unwrap();
        assert_eq!(a, b);
        assert!(parse_region("[300]", &cfg.space).is_err());
        assert!(parse_region("[900, 1.0]", &cfg.space).is_err());
    }
}
