//! Per-candidate significance of the quality effect under the population model.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ParameterSpace, PredictionTable};
use crate::glmm::{build_design, fit, wald_test, FitOptions, GlmmError, ModelSpec, RandomFactor, QUALITY};
use crate::quality::{label_quality, Quality, ThresholdConfig};

use super::ParetoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStatus {
    Fitted,
    /// Too few cases in a quality arm, or a single outcome class.
    DegenerateSplit,
    Separation,
    FitFailed,
}

impl CandidateStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateStatus::Fitted => "fitted",
            CandidateStatus::DegenerateSplit => "DegenerateSplit",
            CandidateStatus::Separation => "CompleteSeparation",
            CandidateStatus::FitFailed => "FitFailed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub config: ThresholdConfig,
    pub status: CandidateStatus,
    pub beta1: Option<f64>,
    pub std_error: Option<f64>,
    /// Raw two-sided Wald p-value.
    pub p_value: Option<f64>,
    /// Benjamini-Hochberg adjusted p-value when the correction is enabled.
    pub p_adjusted: Option<f64>,
    pub n_hq: usize,
    pub n_lq: usize,
    pub converged: bool,
    pub significant: bool,
    pub message: Option<String>,
}

impl CandidateResult {
    fn skipped(config: ThresholdConfig, status: CandidateStatus, n_hq: usize, n_lq: usize, msg: String) -> Self {
        CandidateResult {
            config,
            status,
            beta1: None,
            std_error: None,
            p_value: None,
            p_adjusted: None,
            n_hq,
            n_lq,
            converged: false,
            significant: false,
            message: Some(msg),
        }
    }

    /// A result flagged significant without a fit, for feeding known configurations to the decomposition.
    pub fn assumed_significant(config: ThresholdConfig) -> Self {
        CandidateResult {
            config,
            status: CandidateStatus::Fitted,
            beta1: None,
            std_error: None,
            p_value: None,
            p_adjusted: None,
            n_hq: 0,
            n_lq: 0,
            converged: true,
            significant: true,
            message: None,
        }
    }

    /// The p-value used for the significance decision.
    pub fn decision_p(&self) -> Option<f64> {
        self.p_adjusted.or(self.p_value)
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub alpha: f64,
    /// Minimum number of distinct cases in each quality arm.
    pub min_group: usize,
    pub benjamini_hochberg: bool,
    pub fit: FitOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            alpha: 0.05,
            min_group: 10,
            benjamini_hochberg: false,
            fit: FitOptions::default(),
        }
    }
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    adjusted
}

fn evaluate(
    table: &PredictionTable,
    space: &ParameterSpace,
    config: &ThresholdConfig,
    case_index: &[usize],
    n_cases: usize,
    single_class: bool,
    model: &ModelSpec,
    options: &ScanOptions,
) -> Result<CandidateResult, ParetoError> {
    let mut quality = Vec::with_capacity(table.len());
    let mut case_quality: Vec<Option<Quality>> = vec![None; n_cases];
    for (rec, &c) in table.records().iter().zip(case_index) {
        let q = label_quality(&rec.params, config, space)?;
        quality.push(q.code());
        case_quality[c].get_or_insert(q);
    }
    let n_hq = case_quality.iter().filter(|q| **q == Some(Quality::High)).count();
    let n_lq = n_cases - n_hq;
    if n_hq < options.min_group || n_lq < options.min_group {
        let msg = format!("{n_hq} HQ and {n_lq} LQ cases, minimum {}", options.min_group);
        return Ok(CandidateResult::skipped(
            config.clone(),
            CandidateStatus::DegenerateSplit,
            n_hq,
            n_lq,
            msg,
        ));
    }
    if single_class {
        let msg = "failure indicator has a single class".to_string();
        return Ok(CandidateResult::skipped(
            config.clone(),
            CandidateStatus::DegenerateSplit,
            n_hq,
            n_lq,
            msg,
        ));
    }
    let outcome = build_design(table, model, Some(&quality), None).and_then(|design| fit(&design, &options.fit));
    let fitted = match outcome {
        Ok(f) => f,
        Err(e) => {
            let status = match e {
                GlmmError::CompleteSeparation(_) => CandidateStatus::Separation,
                GlmmError::RankDeficientDesign(_) => CandidateStatus::DegenerateSplit,
                _ => CandidateStatus::FitFailed,
            };
            return Ok(CandidateResult::skipped(
                config.clone(),
                status,
                n_hq,
                n_lq,
                e.to_string(),
            ));
        }
    };
    let wald = wald_test(&fitted, QUALITY);
    let (beta1, std_error, p_value, message) = match wald {
        Ok(w) => (Some(w.estimate), Some(w.std_error), Some(w.p_two_sided), None),
        Err(e) => (fitted.coefficient(QUALITY), None, None, Some(e.to_string())),
    };
    Ok(CandidateResult {
        config: config.clone(),
        status: CandidateStatus::Fitted,
        beta1,
        std_error,
        p_value,
        p_adjusted: None,
        n_hq,
        n_lq,
        converged: fitted.converged && p_value.is_some(),
        significant: false,
        message: message.or_else(|| (!fitted.converged).then(|| "fit did not converge".to_string())),
    })
}

/// Fits the population quality model for every candidate, in parallel on the
/// current rayon pool; the output order always matches `candidates`.
pub fn significance_scan(
    table: &PredictionTable,
    candidates: &[ThresholdConfig],
    space: &ParameterSpace,
    options: &ScanOptions,
) -> Result<Vec<CandidateResult>, ParetoError> {
    if table.is_empty() {
        return Err(ParetoError::EmptyInput("empty prediction table".into()));
    }
    if !(options.alpha > 0.0 && options.alpha <= 1.0) {
        return Err(ParetoError::InvalidArgument(format!(
            "alpha {} outside (0, 1]",
            options.alpha
        )));
    }
    for c in candidates {
        space.check_dim(c.dim())?;
    }
    let mut positions: HashMap<&str, usize> = HashMap::new();
    let case_index: Vec<usize> = table
        .records()
        .iter()
        .map(|r| {
            let next = positions.len();
            *positions.entry(r.case_id.as_str()).or_insert(next)
        })
        .collect();
    let n_cases = positions.len();
    let failures = table.failures();
    let single_class = failures.iter().all(|&f| f == failures[0]);
    let mut model = ModelSpec::quality_population();
    if table.methods().len() < 2 {
        model.random_intercepts.retain(|f| *f != RandomFactor::Method);
    }

    let mut results = candidates
        .par_iter()
        .map(|c| evaluate(table, space, c, &case_index, n_cases, single_class, &model, options))
        .collect::<Result<Vec<_>, _>>()?;

    let fitted: Vec<usize> = (0..results.len()).filter(|&i| results[i].p_value.is_some()).collect();
    if options.benjamini_hochberg {
        let p: Vec<f64> = fitted.iter().map(|&i| results[i].p_value.unwrap_or(1.0)).collect();
        for (&i, q) in fitted.iter().zip(benjamini_hochberg(&p)) {
            results[i].p_adjusted = Some(q);
        }
    }
    for r in &mut results {
        r.significant =
            r.converged && r.beta1.is_some_and(|b| b > 0.0) && r.decision_p().is_some_and(|p| p < options.alpha);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::ct_space;
    use crate::synth::{generate, MethodEffect, SimMode, SimSpec};

    fn planted(n: usize, seed: u64) -> (PredictionTable, ThresholdConfig) {
        let region = ThresholdConfig::new(vec![300.0, 1.0, 2.0]);
        let mut spec = SimSpec::new(
            ct_space(),
            region.clone(),
            n,
            vec![
                MethodEffect::new("m1"),
                MethodEffect::new("m2"),
                MethodEffect::new("m3"),
            ],
            SimMode::QualityFactor,
            seed,
        );
        // 0.15 failure inside, 0.45 outside.
        spec.beta0 = (0.15f64 / 0.85).ln();
        spec.beta1 = (0.45f64 / 0.55).ln() - spec.beta0;
        (generate(&spec).unwrap().0, region)
    }

    #[test]
    fn bh_reference() {
        let adj = benjamini_hochberg(&[0.01, 0.04, 0.03, 0.2]);
        // Sorted 0.01, 0.03, 0.04, 0.2 scale to 0.04, 0.06, 0.0533, 0.2; the running minimum from the top caps 0.06.
        assert!((adj[0] - 0.04).abs() < 1e-15);
        assert!((adj[2] - 0.04 * 4.0 / 3.0).abs() < 1e-15);
        assert!((adj[1] - 0.04 * 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(adj[3], 0.2);
    }

    #[test]
    fn planted_region_is_significant() {
        let (table, region) = planted(500, 21);
        let all_hq = ThresholdConfig::new(vec![50.0, 1.5, 5.0]);
        let opts = ScanOptions::default();
        let r = significance_scan(&table, &[region.clone(), all_hq], &ct_space(), &opts).unwrap();
        assert_eq!(r[0].status, CandidateStatus::Fitted);
        assert!(r[0].significant, "{:?}", r[0]);
        let gap = ((0.45f64 / 0.55) / (0.15 / 0.85)).ln();
        assert!((gap - 1.54).abs() < 0.01);
        assert!(r[0].beta1.unwrap() > 0.0);
        assert_eq!(r[0].n_hq + r[0].n_lq, 500);
        assert_eq!(r[1].status, CandidateStatus::DegenerateSplit);
        assert_eq!(r[1].n_lq, 0);
    }

    #[test]
    fn alpha_one_marks_every_positive_fit() {
        let (table, _) = planted(200, 4);
        let space = ct_space().with_bins(3).unwrap();
        let cands = super::super::grid_candidates(&space);
        let opts = ScanOptions {
            alpha: 1.0,
            ..Default::default()
        };
        let r = significance_scan(&table, &cands, &ct_space(), &opts).unwrap();
        for c in &r {
            assert_eq!(c.significant, c.converged && c.beta1.unwrap_or(0.0) > 0.0);
        }
    }

    #[test]
    fn serial_and_parallel_agree() {
        let (table, _) = planted(150, 9);
        let space = ct_space().with_bins(3).unwrap();
        let cands = super::super::grid_candidates(&space);
        let opts = ScanOptions::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| significance_scan(&table, &cands, &ct_space(), &opts).unwrap());
        let b = four.install(|| significance_scan(&table, &cands, &ct_space(), &opts).unwrap());
        assert_eq!(a, b);
    }
}
