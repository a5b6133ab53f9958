//! Confusion-matrix metrics and rank-based AUC.

use serde::{Deserialize, Serialize};

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Support {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n: usize,
}

/// Metrics are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub specificity: Option<f64>,
    pub sensitivity: Option<f64>,
    pub f1_balanced: Option<f64>,
    pub accuracy_balanced: Option<f64>,
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub support: Support,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Specificity,
    Sensitivity,
    F1Balanced,
    AccuracyBalanced,
    Auc,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Specificity,
        Metric::Sensitivity,
        Metric::F1Balanced,
        Metric::AccuracyBalanced,
        Metric::Auc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Specificity => "specificity",
            Metric::Sensitivity => "sensitivity",
            Metric::F1Balanced => "f1_balanced",
            Metric::AccuracyBalanced => "accuracy_balanced",
            Metric::Auc => "auc",
        }
    }
}

impl MetricSet {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Specificity => self.specificity,
            Metric::Sensitivity => self.sensitivity,
            Metric::F1Balanced => self.f1_balanced,
            Metric::AccuracyBalanced => self.accuracy_balanced,
            Metric::Auc => self.auc,
        }
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Metrics for `(label, score)` pairs with hard predictions `score >= threshold`.
pub fn confusion_metrics(samples: &[(u8, f64)], threshold: f64) -> Result<MetricSet, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySubset);
    }
    let mut s = Support {
        n: samples.len(),
        ..Default::default()
    };
    for &(label, score) in samples {
        match (label == 1, score >= threshold) {
            (true, true) => s.tp += 1,
            (true, false) => s.fn_ += 1,
            (false, true) => s.fp += 1,
            (false, false) => s.tn += 1,
        }
    }
    let sensitivity = ratio(s.tp, s.tp + s.fn_);
    let specificity = ratio(s.tn, s.tn + s.fp);
    let f1_pos = ratio(2 * s.tp, 2 * s.tp + s.fp + s.fn_);
    let f1_neg = ratio(2 * s.tn, 2 * s.tn + s.fp + s.fn_);
    let mean = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| 0.5 * (a + b));
    let hard = samples.iter().all(|&(_, sc)| sc == 0.0 || sc == 1.0);
    let auc = if hard { None } else { auc(samples) };
    Ok(MetricSet {
        specificity,
        sensitivity,
        f1_balanced: mean(f1_pos, f1_neg),
        accuracy_balanced: mean(sensitivity, specificity),
        auc,
        accuracy: (s.tp + s.tn) as f64 / s.n as f64,
        support: s,
    })
}

/// Mid-ranks of `values` (1-based), ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Area under the ROC curve from the rank-sum statistic; `None` when a class is absent.
pub fn auc(samples: &[(u8, f64)]) -> Option<f64> {
    let n_pos = samples.iter().filter(|s| s.0 == 1).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let scores: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let ranks = midranks(&scores);
    let rank_sum: f64 = samples
        .iter()
        .zip(&ranks)
        .filter(|(s, _)| s.0 == 1)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples(tp: usize, fn_: usize, tn: usize, fp: usize) -> Vec<(u8, f64)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat((1, 0.9)).take(tp));
        v.extend(std::iter::repeat((1, 0.1)).take(fn_));
        v.extend(std::iter::repeat((0, 0.2)).take(tn));
        v.extend(std::iter::repeat((0, 0.8)).take(fp));
        v
    }

    #[test]
    fn confusion_arithmetic() {
        let m = confusion_metrics(&samples(9, 1, 4, 6), 0.5).unwrap();
        assert_eq!(m.sensitivity, Some(0.9));
        assert_eq!(m.specificity, Some(0.4));
        assert!((m.accuracy_balanced.unwrap() - 0.65).abs() < 1e-15);
        let f1_pos = 18.0 / (18.0 + 6.0 + 1.0);
        let f1_neg = 8.0 / (8.0 + 6.0 + 1.0);
        assert!((m.f1_balanced.unwrap() - 0.5 * (f1_pos + f1_neg)).abs() < 1e-15);
        assert_eq!(m.support.n, 20);
    }

    #[test]
    fn undefined_metrics() {
        let m = confusion_metrics(&[(1, 0.9), (1, 0.2)], 0.5).unwrap();
        assert_eq!(m.specificity, None);
        assert_eq!(m.accuracy_balanced, None);
        assert_eq!(m.auc, None);
        let hard = confusion_metrics(&[(1, 1.0), (0, 0.0), (1, 0.0)], 0.5).unwrap();
        assert_eq!(hard.auc, None);
        assert!(matches!(confusion_metrics(&[], 0.5), Err(StatsError::EmptySubset)));
    }

    #[test]
    fn separated_auc() {
        let s = [(0, 0.1), (0, 0.3), (1, 0.6), (1, 0.7)];
        assert_eq!(auc(&s), Some(1.0));
        let reversed = [(1, 0.1), (1, 0.3), (0, 0.6), (0, 0.7)];
        assert_eq!(auc(&reversed), Some(0.0));
    }

    fn pair_count_auc(s: &[(u8, f64)]) -> f64 {
        let mut total = 0.0;
        let mut pairs = 0.0;
        for a in s.iter().filter(|x| x.0 == 1) {
            for b in s.iter().filter(|x| x.0 == 0) {
                pairs += 1.0;
                total += if a.1 > b.1 {
                    1.0
                } else if a.1 == b.1 {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / pairs
    }

    #[test]
    fn tied_auc_matches_pair_counting() {
        let s = [(1, 0.4), (0, 0.4), (1, 0.7), (0, 0.7), (1, 0.9), (0, 0.1)];
        // Positive 0.4 earns 1.5 of 3, 0.7 earns 2.5, 0.9 earns 3.
        assert_eq!(pair_count_auc(&s), 7.0 / 9.0);
        assert_eq!(auc(&s), Some(7.0 / 9.0));
    }

    #[test]
    fn midrank_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn auc_equals_mann_whitney(v in proptest::collection::vec((0u8..2, 0u8..20), 2..60)) {
            let s: Vec<(u8, f64)> = v.iter().map(|&(l, k)| (l, f64::from(k) / 20.0)).collect();
            let expected = if s.iter().any(|x| x.0 == 1) && s.iter().any(|x| x.0 == 0) {
                Some(pair_count_auc(&s))
            } else {
                None
            };
            match (auc(&s), expected) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn label_swap_symmetry(v in proptest::collection::vec((0u8..2, 0.0f64..1.0), 2..60)) {
            prop_assume!(v.iter().all(|s| s.1 != 0.5));
            let swapped: Vec<(u8, f64)> = v.iter().map(|&(l, s)| (1 - l, 1.0 - s)).collect();
            let a = confusion_metrics(&v, 0.5).unwrap();
            let b = confusion_metrics(&swapped, 0.5).unwrap();
            prop_assert_eq!(a.sensitivity, b.specificity);
            prop_assert_eq!(a.specificity, b.sensitivity);
            if let (Some(x), Some(y)) = (a.auc, b.auc) {
                // Complemented scores keep the positive-over-negative ordering.
                let flipped: Vec<(u8, f64)> = v.iter().map(|&(l, s)| (1 - l, s)).collect();
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((auc(&flipped).unwrap() - (1.0 - x)).abs() < 1e-12);
            }
        }
    }
}
