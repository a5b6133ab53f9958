//! Threshold grid search, Pareto layers and validated selection.

mod layers;
mod scan;
mod select;

pub use layers::{dominates, non_dominated_sort, pareto_decompose, ParetoLayer, ParetoLayerSet};
pub use scan::{benjamini_hochberg, significance_scan, CandidateResult, CandidateStatus, ScanOptions};
pub use select::{
    select_configurations, validity_from_rows, BoundOp, Constraint, GroupMeans, SelectionEntry, SelectionReport,
    GROUP_ALL, GROUP_HQ, GROUP_LQ,
};

use thiserror::Error;

use crate::dataset::{DatasetError, ParameterSpace};
use crate::quality::ThresholdConfig;

#[derive(Debug, Error)]
pub enum ParetoError {
    #[error("EmptyInput: {0}")]
    EmptyInput(String),
    #[error("NoConfigMeetsConstraints")]
    NoConfigMeetsConstraints,
    #[error("InvalidConstraint: {0}")]
    InvalidConstraint(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Equally spaced values from `min` to `max` inclusive.
pub fn axis_grid(min: f64, max: f64, bins: usize) -> Vec<f64> {
    let step = (max - min) / (bins - 1) as f64;
    (0..bins)
        .map(|i| if i + 1 == bins { max } else { min + step * i as f64 })
        .collect()
}

/// Cartesian product of the per-axis grids, the last axis varying fastest.
pub fn grid_candidates(space: &ParameterSpace) -> Vec<ThresholdConfig> {
    let grids: Vec<Vec<f64>> = space.axes().iter().map(|a| axis_grid(a.min, a.max, a.bins)).collect();
    let mut out = vec![Vec::with_capacity(grids.len())];
    for g in &grids {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                g.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(ThresholdConfig::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::ct_space;
    use crate::dataset::{Axis, Direction};

    #[test]
    fn grid_values_and_order() {
        assert_eq!(axis_grid(50.0, 800.0, 4), vec![50.0, 300.0, 550.0, 800.0]);
        let space = ParameterSpace::new(vec![
            Axis::new("a", 0.0, 1.0, 3, Direction::QualityIncreasing),
            Axis::new("b", 0.0, 2.0, 3, Direction::QualityDecreasing),
        ])
        .unwrap();
        let c = grid_candidates(&space);
        assert_eq!(c.len(), 9);
        assert_eq!(c[0].values(), &[0.0, 0.0]);
        assert_eq!(c[1].values(), &[0.0, 1.0]);
        assert_eq!(c[8].values(), &[1.0, 2.0]);
    }

    #[test]
    fn ct_grid_size() {
        let space = ct_space().with_bins(6).unwrap();
        let c = grid_candidates(&space);
        assert_eq!(c.len(), 216);
        assert!(c
            .iter()
            .all(|t| ThresholdConfig::validated(t.0.clone(), &space).is_ok()));
    }
}
