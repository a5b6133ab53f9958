//! Multi-comparison validation of Pareto configurations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ParetoError, ParetoLayerSet};
use crate::dataset::{ParameterSpace, PredictionTable};
use crate::quality::{label_quality, Quality, ThresholdConfig};
use crate::stats::{tukey_hsd, TukeyPair};

pub const GROUP_ALL: &str = "All";
pub const GROUP_HQ: &str = "HQ";
pub const GROUP_LQ: &str = "LQ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundOp {
    Le,
    Ge,
}

/// Bound on the threshold of one axis, e.g. `XRay <= 300`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub axis: String,
    pub op: BoundOp,
    pub value: f64,
}

impl Constraint {
    pub fn le(axis: impl Into<String>, value: f64) -> Self {
        Constraint {
            axis: axis.into(),
            op: BoundOp::Le,
            value,
        }
    }

    pub fn ge(axis: impl Into<String>, value: f64) -> Self {
        Constraint {
            axis: axis.into(),
            op: BoundOp::Ge,
            value,
        }
    }

    fn holds(&self, threshold: f64) -> bool {
        match self.op {
            BoundOp::Le => threshold <= self.value,
            BoundOp::Ge => threshold >= self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub all: Option<f64>,
    pub hq: Option<f64>,
    pub lq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub layer: usize,
    pub config: ThresholdConfig,
    pub n_hq: usize,
    pub n_lq: usize,
    /// Mean per-(method, fold) accuracy in each group.
    pub means: GroupMeans,
    /// Observations per group, in All/HQ/LQ order.
    pub n_obs: [usize; 3],
    pub anova_p: Option<f64>,
    pub pairs: Vec<TukeyPair>,
    pub valid: bool,
    /// `mean(HQ) - mean(All)`.
    pub score: Option<f64>,
    /// One-based rank among valid entries.
    pub rank: Option<usize>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub alpha: f64,
    pub constraints: Vec<Constraint>,
    /// Valid entries by rank, then invalid entries in layer order.
    pub entries: Vec<SelectionEntry>,
}

impl SelectionReport {
    pub fn best(&self) -> Option<&SelectionEntry> {
        self.entries.first().filter(|e| e.valid)
    }

    pub fn valid(&self) -> impl Iterator<Item = &SelectionEntry> {
        self.entries.iter().filter(|e| e.valid)
    }
}

/// `(mean(b) - mean(a), reject)` for the pair `{a, b}` in either listing order.
fn oriented(pairs: &[TukeyPair], a: &str, b: &str) -> Option<(f64, bool)> {
    pairs.iter().find_map(|p| {
        if p.group1 == a && p.group2 == b {
            Some((p.meandiff, p.reject))
        } else if p.group1 == b && p.group2 == a {
            Some((-p.meandiff, p.reject))
        } else {
            None
        }
    })
}

/// HQ and LQ differ, HQ exceeds All and LQ falls below All, each significantly.
pub fn validity_from_rows(pairs: &[TukeyPair]) -> bool {
    let hq_lq = oriented(pairs, GROUP_HQ, GROUP_LQ);
    let all_hq = oriented(pairs, GROUP_ALL, GROUP_HQ);
    let all_lq = oriented(pairs, GROUP_ALL, GROUP_LQ);
    matches!(
        (hq_lq, all_hq, all_lq),
        (Some((_, true)), Some((up, true)), Some((down, true))) if up > 0.0 && down < 0.0
    )
}

fn check_constraints(constraints: &[Constraint], space: &ParameterSpace) -> Result<Vec<usize>, ParetoError> {
    constraints
        .iter()
        .map(|c| {
            if !c.value.is_finite() {
                return Err(ParetoError::InvalidConstraint(format!(
                    "non-finite bound on {}",
                    c.axis
                )));
            }
            space
                .axis_index(&c.axis)
                .ok_or_else(|| ParetoError::InvalidConstraint(format!("unknown axis {}", c.axis)))
        })
        .collect()
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn evaluate(
    layer: usize,
    config: &ThresholdConfig,
    table: &PredictionTable,
    alpha: f64,
) -> Result<SelectionEntry, ParetoError> {
    let space = table.space();
    // (n, correct) for All, HQ, LQ per (method, fold).
    let mut cells: BTreeMap<(&str, Option<u32>), [(usize, usize); 3]> = BTreeMap::new();
    let mut case_quality: BTreeMap<&str, Quality> = BTreeMap::new();
    for (rec, &f) in table.records().iter().zip(table.failures()) {
        let q = label_quality(&rec.params, config, space)?;
        case_quality.entry(rec.case_id.as_str()).or_insert(q);
        let cell = cells.entry((rec.method.as_str(), rec.fold)).or_default();
        let correct = usize::from(f == 0);
        let g = if q == Quality::High { 1 } else { 2 };
        for k in [0, g] {
            cell[k].0 += 1;
            cell[k].1 += correct;
        }
    }
    let mut obs: [Vec<f64>; 3] = Default::default();
    for cell in cells.values() {
        for k in 0..3 {
            if cell[k].0 > 0 {
                obs[k].push(cell[k].1 as f64 / cell[k].0 as f64);
            }
        }
    }
    let n_hq = case_quality.values().filter(|q| **q == Quality::High).count();
    let means = GroupMeans {
        all: mean(&obs[0]),
        hq: mean(&obs[1]),
        lq: mean(&obs[2]),
    };
    let n_obs = [obs[0].len(), obs[1].len(), obs[2].len()];
    let groups: Vec<(String, Vec<f64>)> = [GROUP_ALL, GROUP_HQ, GROUP_LQ]
        .iter()
        .zip(obs)
        .map(|(n, v)| (n.to_string(), v))
        .collect();
    let mut entry = SelectionEntry {
        layer,
        config: config.clone(),
        n_hq,
        n_lq: case_quality.len() - n_hq,
        means,
        n_obs,
        anova_p: None,
        pairs: Vec::new(),
        valid: false,
        score: None,
        rank: None,
        note: None,
    };
    match tukey_hsd(&groups, alpha) {
        Ok(t) => {
            entry.anova_p = Some(t.anova.p_value);
            entry.valid = validity_from_rows(&t.pairs);
            entry.pairs = t.pairs;
            entry.score = means.hq.zip(means.all).map(|(h, a)| h - a);
        }
        Err(e) => entry.note = Some(e.to_string()),
    }
    Ok(entry)
}

/// Runs the three-group comparison for every layered configuration meeting `constraints`.
pub fn select_configurations(
    layers: &ParetoLayerSet,
    table: &PredictionTable,
    constraints: &[Constraint],
    alpha: f64,
) -> Result<SelectionReport, ParetoError> {
    if layers.is_empty() {
        return Err(ParetoError::EmptyInput("no Pareto layers".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ParetoError::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    let axes = check_constraints(constraints, table.space())?;
    let mut entries = Vec::new();
    for layer in &layers.layers {
        for c in &layer.configs {
            let keep = constraints.iter().zip(&axes).all(|(k, &i)| k.holds(c.config.0[i]));
            if keep {
                entries.push(evaluate(layer.index, &c.config, table, alpha)?);
            }
        }
    }
    if entries.is_empty() {
        return Err(ParetoError::NoConfigMeetsConstraints);
    }
    // Stable sort keeps layer order among ties and among invalid entries.
    entries.sort_by(|a, b| match (a.valid, b.valid) {
        (true, true) => b
            .score
            .unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&a.score.unwrap_or(f64::NEG_INFINITY)),
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        (false, false) => std::cmp::Ordering::Equal,
    });
    for (i, e) in entries.iter_mut().filter(|e| e.valid).enumerate() {
        e.rank = Some(i + 1);
    }
    Ok(SelectionReport {
        alpha,
        constraints: constraints.to_vec(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::ct_space;
    use crate::dataset::{LoadOptions, PredictionRecord};
    use crate::pareto::{pareto_decompose, CandidateResult};

    fn row(a: &str, b: &str, meandiff: f64, reject: bool) -> TukeyPair {
        TukeyPair {
            group1: a.into(),
            group2: b.into(),
            meandiff,
            ci_low: meandiff - 0.04,
            ci_high: meandiff + 0.04,
            p_adj: if reject { 0.0 } else { 0.4 },
            reject,
        }
    }

    #[test]
    fn published_rows() {
        let valid = [
            row(GROUP_ALL, GROUP_HQ, 0.10, true),
            row(GROUP_ALL, GROUP_LQ, -0.17, true),
            row(GROUP_HQ, GROUP_LQ, -0.28, true),
        ];
        assert!(validity_from_rows(&valid));
        let lq_not_lower = [
            row(GROUP_ALL, GROUP_HQ, 0.05, true),
            row(GROUP_ALL, GROUP_LQ, -0.02, false),
            row(GROUP_HQ, GROUP_LQ, -0.07, true),
        ];
        assert!(!validity_from_rows(&lq_not_lower));
        let swapped = [
            row(GROUP_HQ, GROUP_ALL, -0.10, true),
            row(GROUP_LQ, GROUP_ALL, 0.17, true),
            row(GROUP_LQ, GROUP_HQ, 0.28, true),
        ];
        assert!(validity_from_rows(&swapped));
        assert!(!validity_from_rows(&valid[..2]));
    }

    fn table(accuracy: impl Fn(bool, u32) -> bool) -> PredictionTable {
        let mut records = Vec::new();
        for case in 0..200u32 {
            let hq = (case / 10) % 2 == 0;
            let params = if hq {
                vec![500.0, 0.5, 1.0]
            } else {
                vec![100.0, 1.4, 4.0]
            };
            for m in ["a", "b", "c"] {
                let correct = accuracy(hq, case / 10 * 3 + m.as_bytes()[0] as u32);
                records.push(PredictionRecord {
                    case_id: format!("c{case}"),
                    method: m.into(),
                    fold: Some(case % 10),
                    label: 1,
                    score: if correct { 0.9 } else { 0.1 },
                    params: params.clone(),
                });
            }
        }
        PredictionTable::from_records(ct_space(), records, LoadOptions::default()).unwrap()
    }

    fn single_layer(configs: &[Vec<f64>]) -> ParetoLayerSet {
        let r: Vec<CandidateResult> = configs
            .iter()
            .map(|c| CandidateResult::assumed_significant(ThresholdConfig::new(c.clone())))
            .collect();
        pareto_decompose(&r, &ct_space(), false).unwrap()
    }

    #[test]
    fn separable_quality_is_valid() {
        let t = table(|hq, k| if hq { k % 10 != 0 } else { k % 10 < 4 });
        let layers = single_layer(&[vec![300.0, 1.0, 2.0]]);
        let report = select_configurations(&layers, &t, &[], 0.05).unwrap();
        let best = report.best().unwrap();
        assert!(best.valid);
        assert_eq!(best.rank, Some(1));
        assert_eq!(best.n_obs, [30, 30, 30]);
        assert!(best.score.unwrap() > 0.0);
    }

    #[test]
    fn identical_groups_are_invalid() {
        let t = table(|_, _| true);
        let layers = single_layer(&[vec![300.0, 1.0, 2.0]]);
        let report = select_configurations(&layers, &t, &[], 0.05).unwrap();
        assert!(report.best().is_none());
        assert!(report.entries[0].pairs.iter().all(|p| p.meandiff == 0.0 && !p.reject));
    }

    #[test]
    fn constraints_filter_membership_only() {
        let t = table(|hq, k| if hq { k % 10 != 0 } else { k % 10 < 4 });
        let layers = single_layer(&[vec![300.0, 1.0, 2.0], vec![200.0, 0.8, 2.5]]);
        let all = select_configurations(&layers, &t, &[], 0.05).unwrap();
        let some = select_configurations(&layers, &t, &[Constraint::le("XRay", 250.0)], 0.05).unwrap();
        assert_eq!(some.entries.len(), 1);
        let same = all.entries.iter().find(|e| e.config == some.entries[0].config).unwrap();
        assert_eq!(same.pairs, some.entries[0].pairs);
        assert!(matches!(
            select_configurations(&layers, &t, &[Constraint::le("XRay", 60.0)], 0.05),
            Err(ParetoError::NoConfigMeetsConstraints)
        ));
        assert!(matches!(
            select_configurations(&layers, &t, &[Constraint::ge("kVp", 1.0)], 0.05),
            Err(ParetoError::InvalidConstraint(_))
        ));
    }
}
