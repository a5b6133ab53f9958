//! Wilcoxon signed-rank test for paired differences.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::metrics::midranks;
use super::StatsError;

/// Largest number of non-zero differences handled by the exact distribution.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Differences tend to be positive.
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub statistic: f64,
    /// Differences remaining after zeros are dropped.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Signed-rank test; zero differences are dropped and ties receive mid-ranks.
pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<WilcoxonResult, StatsError> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::InvalidArgument("non-finite difference".into()));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nz.is_empty() {
        return Err(StatsError::AllZeroDiffs);
    }
    let n = nz.len();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    // Mid-ranks are multiples of 1/2, so doubled ranks are exact integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let t2: usize = nz.iter().zip(&doubled).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let statistic = t2 as f64 / 2.0;

    let (upper, lower, exact) = if n <= EXACT_MAX_N {
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0.0f64; total + 1];
        counts[0] = 1.0;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] > 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = 2f64.powi(n as i32);
        let upper = counts[t2..].iter().sum::<f64>() / all;
        let lower = counts[..=t2].iter().sum::<f64>() / all;
        (upper, lower, true)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = doubled.clone();
        sorted.sort_unstable();
        let mut i = 0;
        while i < sorted.len() {
            let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
            let t = j as f64;
            tie_term += t * t * t - t;
            i += j;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let sd = var.sqrt();
        let phi_upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
        let upper = phi_upper((statistic - mean - 0.5) / sd);
        let lower = 1.0 - phi_upper((statistic - mean + 0.5) / sd);
        (upper, lower, false)
    };
    let p_value = match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    };
    Ok(WilcoxonResult {
        statistic,
        n,
        p_value: p_value.min(1.0),
        exact,
    })
}
