//! Synthetic prediction tables drawn from known logistic mixed models.
//!
//! Every case owns an independent ChaCha8 stream (`stream = case index + 1`),
//! and method-level random intercepts come from stream 0, so a table is a pure
//! function of its spec and seed on every platform.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, WeightedIndex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, LoadOptions, ParameterSpace, PredictionRecord, PredictionTable};
use crate::quality::{label_quality, signed_distance, ThresholdConfig};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEffect {
    pub name: String,
    /// Method shift of the intercept.
    #[serde(default)]
    pub beta2: f64,
    /// Method shift of the covariate slope.
    #[serde(default)]
    pub beta3: f64,
}

impl MethodEffect {
    pub fn new(name: impl Into<String>) -> Self {
        MethodEffect {
            name: name.into(),
            beta2: 0.0,
            beta3: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSampler {
    /// Uniform over the axis range.
    Uniform,
    Categorical {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    QualityFactor,
    DistanceCovariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreMode {
    /// Score is the hard predicted class.
    Indicator,
    /// Score sits on the predicted side of 0.5 at a noisy margin.
    Noisy { sd: f64 },
}

fn default_prevalence() -> f64 {
    0.5
}

fn default_folds() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub space: ParameterSpace,
    pub true_region: ThresholdConfig,
    pub n_cases: usize,
    pub methods: Vec<MethodEffect>,
    /// Defaults to the first method.
    #[serde(default)]
    pub reference_method: Option<String>,
    pub beta0: f64,
    pub beta1: f64,
    #[serde(default)]
    pub sigma_case: f64,
    #[serde(default)]
    pub sigma_method: f64,
    /// One sampler per axis; empty means uniform on every axis.
    #[serde(default)]
    pub param_sampler: Vec<ParamSampler>,
    pub mode: SimMode,
    pub seed: u64,
    #[serde(default = "default_prevalence")]
    pub prevalence: f64,
    #[serde(default = "default_folds")]
    pub n_folds: u32,
    #[serde(default = "default_score_mode")]
    pub score_mode: ScoreMode,
}

fn default_score_mode() -> ScoreMode {
    ScoreMode::Indicator
}

impl SimSpec {
    pub fn new(
        space: ParameterSpace,
        true_region: ThresholdConfig,
        n_cases: usize,
        methods: Vec<MethodEffect>,
        mode: SimMode,
        seed: u64,
    ) -> Self {
        SimSpec {
            space,
            true_region,
            n_cases,
            methods,
            reference_method: None,
            beta0: 0.0,
            beta1: 0.0,
            sigma_case: 0.0,
            sigma_method: 0.0,
            param_sampler: Vec::new(),
            mode,
            seed,
            prevalence: default_prevalence(),
            n_folds: default_folds(),
            score_mode: ScoreMode::Indicator,
        }
    }

    pub fn reference(&self) -> Option<&str> {
        self.reference_method
            .as_deref()
            .or_else(|| self.methods.first().map(|m| m.name.as_str()))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n_cases == 0 {
            return invalid("n_cases must be positive".into());
        }
        if self.methods.is_empty() {
            return invalid("at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.name == m.name) {
                return invalid(format!("duplicate method {}", m.name));
            }
            if !m.beta2.is_finite() || !m.beta3.is_finite() {
                return invalid(format!("non-finite effect for method {}", m.name));
            }
        }
        let reference = self.reference().unwrap_or_default();
        match self.methods.iter().find(|m| m.name == reference) {
            None => return invalid(format!("reference method {reference} is not listed")),
            Some(m) if m.beta2 != 0.0 || m.beta3 != 0.0 => {
                return invalid(format!("reference method {reference} must have beta2 = beta3 = 0"))
            }
            _ => {}
        }
        for (name, s) in [("sigma_case", self.sigma_case), ("sigma_method", self.sigma_method)] {
            if !(s.is_finite() && s >= 0.0) {
                return invalid(format!("{name} must be a non-negative real, got {s}"));
            }
        }
        if !self.beta0.is_finite() || !self.beta1.is_finite() {
            return invalid("beta0 and beta1 must be finite".into());
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return invalid(format!("prevalence {} outside (0, 1)", self.prevalence));
        }
        if self.n_folds == 0 {
            return invalid("n_folds must be positive".into());
        }
        if let ScoreMode::Noisy { sd } = self.score_mode {
            if !(sd.is_finite() && sd >= 0.0) {
                return invalid(format!("score noise sd must be non-negative, got {sd}"));
            }
        }
        ThresholdConfig::validated(self.true_region.0.clone(), &self.space)
            .map_err(|e| SynthError::InvalidSpec(format!("true_region: {e}")))?;
        if !self.param_sampler.is_empty() && self.param_sampler.len() != self.space.dim() {
            return invalid(format!(
                "{} parameter samplers for {} axes",
                self.param_sampler.len(),
                self.space.dim()
            ));
        }
        for (sampler, axis) in self.param_sampler.iter().zip(self.space.axes()) {
            if let ParamSampler::Categorical { values, weights } = sampler {
                if values.is_empty() || values.len() != weights.len() {
                    return invalid(format!(
                        "categorical sampler for {} needs matching values and weights",
                        axis.name
                    ));
                }
                if values
                    .iter()
                    .any(|v| !(v.is_finite() && *v >= axis.min && *v <= axis.max))
                {
                    return invalid(format!("categorical value outside the range of {}", axis.name));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return invalid(format!(
                        "categorical weights for {} must be non-negative with positive sum",
                        axis.name
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub mode: SimMode,
    pub true_region: ThresholdConfig,
    pub beta0: f64,
    pub beta1: f64,
    pub reference_method: String,
    pub methods: Vec<MethodEffect>,
    pub sigma_case: f64,
    pub sigma_method: f64,
    /// Realized method random intercepts, in `methods` order.
    pub method_intercepts: Vec<f64>,
    pub n_cases: usize,
    pub n_records: usize,
    pub failure_rate: f64,
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn sample_params(spec: &SimSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    spec.space
        .axes()
        .iter()
        .enumerate()
        .map(|(j, axis)| match spec.param_sampler.get(j) {
            Some(ParamSampler::Categorical { values, weights }) => {
                let idx = WeightedIndex::new(weights).expect("validated weights");
                values[idx.sample(rng)]
            }
            _ => rng.gen_range(axis.min..=axis.max),
        })
        .collect()
}

/// Draws a table from `spec`; identical specs give identical tables.
pub fn generate(spec: &SimSpec) -> Result<(PredictionTable, GroundTruth), SynthError> {
    spec.validate()?;
    let reference = spec.reference().unwrap_or_default().to_string();
    let mut method_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    method_rng.set_stream(0);
    let method_intercepts: Vec<f64> = spec
        .methods
        .iter()
        .map(|_| spec.sigma_method * normal(&mut method_rng))
        .collect();
    let width = spec.n_cases.to_string().len();

    let mut records = Vec::with_capacity(spec.n_cases * spec.methods.len());
    for case in 0..spec.n_cases {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(case as u64 + 1);
        let params = sample_params(spec, &mut rng);
        let x = match spec.mode {
            SimMode::QualityFactor => f64::from(label_quality(&params, &spec.true_region, &spec.space)?.code()),
            SimMode::DistanceCovariate => signed_distance(&params, &spec.true_region, &spec.space)?,
        };
        let case_effect = spec.sigma_case * normal(&mut rng);
        let label = u8::from(rng.gen::<f64>() < spec.prevalence);
        let case_id = format!("case{case:0width$}");
        let fold = (case as u32) % spec.n_folds;
        // Failures are drawn before any score noise so both score modes share them.
        let failures: Vec<bool> = spec
            .methods
            .iter()
            .zip(&method_intercepts)
            .map(|(m, b_method)| {
                let eta = spec.beta0 + m.beta2 + (spec.beta1 + m.beta3) * x + case_effect + b_method;
                rng.gen::<f64>() < logistic(eta)
            })
            .collect();
        for (m, failure) in spec.methods.iter().zip(failures) {
            let predicted = if failure { 1 - label } else { label };
            let score = match spec.score_mode {
                ScoreMode::Indicator => f64::from(predicted),
                ScoreMode::Noisy { sd } => {
                    let margin = (0.25 + sd * normal(&mut rng)).abs().clamp(1e-3, 0.5);
                    if predicted == 1 {
                        0.5 + margin
                    } else {
                        0.5 - margin
                    }
                }
            };
            records.push(PredictionRecord {
                case_id: case_id.clone(),
                method: m.name.clone(),
                fold: Some(fold),
                label,
                score,
                params: params.clone(),
            });
        }
    }
    let table = PredictionTable::from_records(spec.space.clone(), records, LoadOptions::default())?;
    let n_records = table.len();
    let failure_rate = table.failures().iter().map(|&f| f64::from(f)).sum::<f64>() / n_records as f64;
    let truth = GroundTruth {
        seed: spec.seed,
        mode: spec.mode,
        true_region: spec.true_region.clone(),
        beta0: spec.beta0,
        beta1: spec.beta1,
        reference_method: reference,
        methods: spec.methods.clone(),
        sigma_case: spec.sigma_case,
        sigma_method: spec.sigma_method,
        method_intercepts,
        n_cases: spec.n_cases,
        n_records,
        failure_rate,
    };
    Ok((table, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::tests::ct_space;
    use crate::dataset::write_predictions;
    use crate::quality::Quality;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn spec(n: usize, seed: u64) -> SimSpec {
        let mut s = SimSpec::new(
            ct_space(),
            ThresholdConfig::new(vec![200.0, 1.0, 1.5]),
            n,
            vec![MethodEffect::new("a"), MethodEffect::new("b")],
            SimMode::QualityFactor,
            seed,
        );
        s.beta0 = -1.0;
        s.beta1 = 1.2;
        s.sigma_case = 0.4;
        s.sigma_method = 0.2;
        s
    }

    fn csv(table: &PredictionTable) -> Vec<u8> {
        let mut out = Vec::new();
        write_predictions(table, &mut out).unwrap();
        out
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, ta) = generate(&spec(300, 7)).unwrap();
        let (b, tb) = generate(&spec(300, 7)).unwrap();
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(ta, tb);
        let (c, _) = generate(&spec(300, 8)).unwrap();
        assert_ne!(csv(&a), csv(&c));
    }

    #[test]
    fn failure_indicator_reproduces_draws() {
        let mut s = spec(200, 3);
        s.score_mode = ScoreMode::Noisy { sd: 0.2 };
        let (noisy, _) = generate(&s).unwrap();
        s.score_mode = ScoreMode::Indicator;
        let (hard, _) = generate(&s).unwrap();
        assert!(hard.has_hard_scores());
        assert!(!noisy.has_hard_scores());
        assert_eq!(hard.failures(), noisy.failures());
        assert!(noisy.records().iter().all(|r| r.score != 0.5));
    }

    #[test]
    fn intercept_only_failure_rate() {
        let mut s = spec(20_000, 11);
        s.methods.truncate(1);
        s.beta0 = -1.386;
        s.beta1 = 0.0;
        s.sigma_case = 0.0;
        s.sigma_method = 0.0;
        let (_, truth) = generate(&s).unwrap();
        let n = truth.n_records as f64;
        let p = logistic(-1.386);
        assert!((p - 0.2).abs() < 1e-4);
        assert!((truth.failure_rate - p).abs() < 2.0 * (0.16 / n).sqrt());
    }

    #[test]
    fn stratified_frequencies_fit_logistic() {
        let mut s = spec(6000, 5);
        s.methods = vec![
            MethodEffect::new("ref"),
            MethodEffect {
                name: "other".into(),
                beta2: 0.5,
                beta3: -0.4,
            },
        ];
        s.sigma_case = 0.0;
        s.sigma_method = 0.0;
        let (table, _) = generate(&s).unwrap();
        let mut counts = [[0.0f64; 2]; 4];
        for (r, &f) in table.records().iter().zip(table.failures()) {
            let q = label_quality(&r.params, &s.true_region, &s.space).unwrap() == Quality::Low;
            let cell = usize::from(r.method == "other") * 2 + usize::from(q);
            counts[cell][0] += 1.0;
            counts[cell][1] += f64::from(f);
        }
        let mut chi2 = 0.0;
        for (cell, c) in counts.iter().enumerate() {
            let (m, q) = (cell / 2, cell % 2);
            let m = &s.methods[m];
            let p = logistic(s.beta0 + m.beta2 + (s.beta1 + m.beta3) * q as f64);
            let expected = c[0] * p;
            chi2 += (c[1] - expected).powi(2) / (expected * (1.0 - p));
        }
        let crit = ChiSquared::new(4.0).unwrap().inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} >= {crit}");
    }

    #[test]
    fn folds_and_ids() {
        let (t, _) = generate(&spec(25, 1)).unwrap();
        assert_eq!(t.records()[0].case_id, "case00");
        assert_eq!(t.records()[2 * 13].fold, Some(3));
        assert_eq!(t.cases().len(), 25);
    }

    #[test]
    fn categorical_sampler() {
        let mut s = spec(100, 2);
        s.param_sampler = vec![
            ParamSampler::Categorical {
                values: vec![100.0, 400.0],
                weights: vec![1.0, 3.0],
            },
            ParamSampler::Uniform,
            ParamSampler::Uniform,
        ];
        let (t, _) = generate(&s).unwrap();
        assert!(t.records().iter().all(|r| r.params[0] == 100.0 || r.params[0] == 400.0));
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(10, 1);
        s.sigma_case = -0.1;
        assert!(matches!(generate(&s), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(0, 1);
        s.n_cases = 0;
        assert!(matches!(generate(&s), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(10, 1);
        s.methods[0].beta2 = 0.3;
        assert!(matches!(generate(&s), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(10, 1);
        s.true_region = ThresholdConfig::new(vec![1.0]);
        assert!(matches!(generate(&s), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn spec_json_defaults() {
        let json = r#"{
            "space": {"axes": [{"name": "XRay", "min": 50, "max": 800, "bins": 6, "direction": "quality_increasing"}]},
            "true_region": [200],
            "n_cases": 5,
            "methods": [{"name": "m"}],
            "beta0": -1.0, "beta1": 1.0,
            "mode": "quality_factor",
            "seed": 9
        }"#;
        let s: SimSpec = serde_json::from_str(json).unwrap();
        assert_eq!(s.prevalence, 0.5);
        assert_eq!(s.n_folds, 10);
        assert_eq!(s.score_mode, ScoreMode::Indicator);
        assert!(generate(&s).is_ok());
    }
}
