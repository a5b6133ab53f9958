//! Dominance order and iterative peeling of non-dominated sets.

use serde::{Deserialize, Serialize};

use super::{CandidateResult, ParetoError};
use crate::dataset::{Direction, ParameterSpace};
use crate::quality::{region_union_membership, ThresholdConfig};

/// `a` dominates `b` when it is at least as strict on every axis and stricter on one.
pub fn dominates(a: &[f64], b: &[f64], directions: &[Direction]) -> bool {
    let mut strict = false;
    for ((&x, &y), dir) in a.iter().zip(b).zip(directions) {
        let (better, worse) = match dir {
            Direction::QualityIncreasing => (x > y, x < y),
            Direction::QualityDecreasing => (x < y, x > y),
        };
        if worse {
            return false;
        }
        strict |= better;
    }
    strict
}

/// Zero-based layer index of every point (fast non-dominated sorting).
pub fn non_dominated_sort(points: &[Vec<f64>], directions: &[Direction]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j], directions) {
                dominated[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&points[j], &points[i], directions) {
                dominated[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut layer = vec![usize::MAX; n];
    let mut front: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut depth = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &i in &front {
            layer[i] = depth;
            for &j in &dominated[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        front = next;
        depth += 1;
    }
    layer
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoLayer {
    /// One-based layer number.
    pub index: usize,
    pub configs: Vec<CandidateResult>,
}

impl ParetoLayer {
    pub fn thresholds(&self) -> Vec<ThresholdConfig> {
        self.configs.iter().map(|c| c.config.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoLayerSet {
    pub axes: Vec<String>,
    pub directions: Vec<Direction>,
    /// Whether the dominance order was reversed.
    pub reversed: bool,
    pub layers: Vec<ParetoLayer>,
}

impl ParetoLayerSet {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// One-based layer of `config`, if present.
    pub fn layer_of(&self, config: &ThresholdConfig) -> Option<usize> {
        self.layers
            .iter()
            .find(|l| l.configs.iter().any(|c| &c.config == config))
            .map(|l| l.index)
    }

    /// Whether `point` is HQ under any configuration of layer `index` (one-based).
    pub fn region_contains(&self, index: usize, point: &[f64], space: &ParameterSpace) -> Result<bool, ParetoError> {
        let layer = self
            .layers
            .get(index.wrapping_sub(1))
            .ok_or_else(|| ParetoError::InvalidArgument(format!("no layer {index}")))?;
        Ok(region_union_membership(point, &layer.thresholds(), space)?)
    }
}

/// Peels the significant results into layers, most stringent first.
///
/// Duplicate threshold vectors keep their first occurrence. With `reverse`
/// the dominance order is flipped so the loosest configurations come first.
pub fn pareto_decompose(
    results: &[CandidateResult],
    space: &ParameterSpace,
    reverse: bool,
) -> Result<ParetoLayerSet, ParetoError> {
    let mut unique: Vec<&CandidateResult> = Vec::new();
    for r in results.iter().filter(|r| r.significant) {
        space.check_dim(r.config.dim())?;
        if !unique.iter().any(|u| u.config == r.config) {
            unique.push(r);
        }
    }
    if unique.is_empty() {
        return Err(ParetoError::EmptyInput("no significant configurations".into()));
    }
    let directions: Vec<Direction> = space
        .axes()
        .iter()
        .map(|a| if reverse { a.direction.reversed() } else { a.direction })
        .collect();
    let points: Vec<Vec<f64>> = unique.iter().map(|r| r.config.0.clone()).collect();
    let assignment = non_dominated_sort(&points, &directions);
    let depth = assignment.iter().max().map_or(0, |m| m + 1);
    let mut layers: Vec<ParetoLayer> = (0..depth)
        .map(|i| ParetoLayer {
            index: i + 1,
            configs: Vec::new(),
        })
        .collect();
    for (r, &l) in unique.iter().zip(&assignment) {
        layers[l].configs.push((*r).clone());
    }
    Ok(ParetoLayerSet {
        axes: space.axes().iter().map(|a| a.name.clone()).collect(),
        directions,
        reversed: reverse,
        layers,
    })
}
