//! Wald inference, odds-ratio contrasts and decay curves from a fitted model.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::design::{interaction_column, method_column, Covariate, DISTANCE, INTERCEPT};
use super::fit::GlmmFit;
use super::GlmmError;

/// Two-sided 95% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_two_sided: f64,
}

impl WaldResult {
    pub fn from_estimate(estimate: f64, std_error: f64) -> Result<Self, GlmmError> {
        if !(std_error > 0.0) {
            return Err(GlmmError::ZeroVariance);
        }
        let z = estimate / std_error;
        Ok(WaldResult {
            estimate,
            std_error,
            z,
            p_two_sided: normal_two_sided_p(z),
        })
    }

    /// Wald interval on the linear scale.
    pub fn interval(&self) -> (f64, f64) {
        (
            self.estimate - Z_975 * self.std_error,
            self.estimate + Z_975 * self.std_error,
        )
    }
}

/// `2 (1 - Phi(|z|))`, computed without cancellation.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wald_test(fit: &GlmmFit, coefficient: &str) -> Result<WaldResult, GlmmError> {
    let i = fit
        .index_of(coefficient)
        .ok_or_else(|| GlmmError::UnknownCoefficient(coefficient.to_string()))?;
    WaldResult::from_estimate(fit.coefficients[i], fit.covariance[i][i].max(0.0).sqrt())
}

/// Wald test of `sum_k weight_k * beta_k` for named coefficients.
pub fn wald_combination(fit: &GlmmFit, terms: &[(&str, f64)]) -> Result<WaldResult, GlmmError> {
    let idx: Vec<(usize, f64)> = terms
        .iter()
        .map(|(name, w)| {
            fit.index_of(name)
                .map(|i| (i, *w))
                .ok_or_else(|| GlmmError::UnknownCoefficient(name.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let estimate = idx.iter().map(|&(i, w)| w * fit.coefficients[i]).sum();
    let var: f64 = idx
        .iter()
        .flat_map(|&(i, wi)| idx.iter().map(move |&(j, wj)| wi * wj * fit.covariance[i][j]))
        .sum();
    WaldResult::from_estimate(estimate, var.max(0.0).sqrt())
}

/// A back-transformed quantity with its 95% Wald interval and p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

impl RatioEstimate {
    fn exp(w: &WaldResult) -> Self {
        let (lo, hi) = w.interval();
        RatioEstimate {
            estimate: w.estimate.exp(),
            ci_low: lo.exp(),
            ci_high: hi.exp(),
            p_value: w.p_two_sided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOdds {
    pub method: String,
    pub is_reference: bool,
    /// Failure odds in HQ (quality models) or at `dQ = 0` (distance models).
    pub odds_hq: f64,
    /// Failure odds in LQ; distance models report the odds at `dQ = 1`.
    pub odds_lq: f64,
    /// LQ-vs-HQ odds ratio; for distance models the decay rate per unit `dQ`.
    pub or_quality: RatioEstimate,
    /// Odds ratio against the reference method in HQ (or at `dQ = 0`).
    pub or_hq_vs_reference: Option<RatioEstimate>,
    /// Odds ratio against the reference method in LQ (or per unit `dQ` slope).
    pub or_lq_vs_reference: Option<RatioEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsReport {
    pub covariate: Covariate,
    pub methods: Vec<MethodOdds>,
}

/// Back-transforms a quality or distance fit into per-method odds and odds ratios.
pub fn derive_odds_ratios(fit: &GlmmFit) -> Result<OddsReport, GlmmError> {
    let layout = &fit.layout;
    let covariate = layout
        .covariate
        .ok_or_else(|| GlmmError::SpecMismatch("fit has no quality or distance term".into()))?;
    let cov = covariate.column();
    for name in [INTERCEPT, cov] {
        if fit.index_of(name).is_none() {
            return Err(GlmmError::SpecMismatch(format!("fit lacks {name}")));
        }
    }
    let b0 = fit.coefficient(INTERCEPT).unwrap_or_default();
    let b1 = fit.coefficient(cov).unwrap_or_default();

    let reference_name = layout
        .reference_method
        .clone()
        .unwrap_or_else(|| "population".to_string());
    let mut methods = vec![MethodOdds {
        method: reference_name,
        is_reference: true,
        odds_hq: b0.exp(),
        odds_lq: b0.exp() * b1.exp(),
        or_quality: RatioEstimate::exp(&wald_test(fit, cov)?),
        or_hq_vs_reference: None,
        or_lq_vs_reference: None,
    }];

    for m in &layout.methods {
        let b2_name = method_column(m);
        let b2 = fit
            .coefficient(&b2_name)
            .ok_or_else(|| GlmmError::SpecMismatch(format!("fit lacks {b2_name}")))?;
        let b3_name = interaction_column(covariate, m);
        let b3 = if layout.interaction {
            fit.coefficient(&b3_name)
                .ok_or_else(|| GlmmError::SpecMismatch(format!("fit lacks {b3_name}")))?
        } else {
            0.0
        };
        let mut quality_terms = vec![(cov, 1.0)];
        let mut lq_terms = vec![(b2_name.as_str(), 1.0)];
        if layout.interaction {
            quality_terms.push((b3_name.as_str(), 1.0));
            lq_terms.push((b3_name.as_str(), 1.0));
        }
        methods.push(MethodOdds {
            method: m.clone(),
            is_reference: false,
            odds_hq: b0.exp() * b2.exp(),
            odds_lq: b0.exp() * b1.exp() * b2.exp() * b3.exp(),
            or_quality: RatioEstimate::exp(&wald_combination(fit, &quality_terms)?),
            or_hq_vs_reference: Some(RatioEstimate::exp(&wald_test(fit, &b2_name)?)),
            or_lq_vs_reference: Some(RatioEstimate::exp(&wald_combination(fit, &lq_terms)?)),
        });
    }
    Ok(OddsReport { covariate, methods })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d_q: f64,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub method: String,
    pub points: Vec<CurvePoint>,
}

fn probability(eta: f64) -> f64 {
    let p = if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Failure probability along `d_grid` for each method of a distance fit, with
/// pointwise 95% bands computed on the linear predictor.
pub fn decay_curve(fit: &GlmmFit, d_grid: &[f64]) -> Result<Vec<DecayCurve>, GlmmError> {
    if fit.layout.covariate != Some(Covariate::Distance) || fit.index_of(DISTANCE).is_none() {
        return Err(GlmmError::SpecMismatch("decay curves need a distance fit".into()));
    }
    let mut series: Vec<(String, Vec<(String, f64)>, Vec<(String, f64)>)> = Vec::new();
    let reference = fit
        .layout
        .reference_method
        .clone()
        .unwrap_or_else(|| "population".to_string());
    series.push((reference, vec![(INTERCEPT.into(), 1.0)], vec![(DISTANCE.into(), 1.0)]));
    for m in &fit.layout.methods {
        let mut slope = vec![(DISTANCE.to_string(), 1.0)];
        if fit.layout.interaction {
            slope.push((interaction_column(Covariate::Distance, m), 1.0));
        }
        series.push((m.clone(), vec![(INTERCEPT.into(), 1.0), (method_column(m), 1.0)], slope));
    }
    series
        .into_iter()
        .map(|(method, intercept, slope)| {
            let points = d_grid
                .iter()
                .map(|&d| {
                    let terms: Vec<(&str, f64)> = intercept
                        .iter()
                        .map(|(n, w)| (n.as_str(), *w))
                        .chain(slope.iter().map(|(n, w)| (n.as_str(), w * d)))
                        .collect();
                    let w = combination(fit, &terms)?;
                    let (lo, hi) = (w.0 - Z_975 * w.1, w.0 + Z_975 * w.1);
                    Ok(CurvePoint {
                        d_q: d,
                        probability: probability(w.0),
                        ci_low: probability(lo),
                        ci_high: probability(hi),
                    })
                })
                .collect::<Result<_, GlmmError>>()?;
            Ok(DecayCurve { method, points })
        })
        .collect()
}

/// Estimate and standard error of a linear combination; zero variance allowed.
fn combination(fit: &GlmmFit, terms: &[(&str, f64)]) -> Result<(f64, f64), GlmmError> {
    let mut est = 0.0;
    let mut idx = Vec::with_capacity(terms.len());
    for (name, w) in terms {
        let i = fit
            .index_of(name)
            .ok_or_else(|| GlmmError::UnknownCoefficient(name.to_string()))?;
        est += w * fit.coefficients[i];
        idx.push((i, *w));
    }
    let var: f64 = idx
        .iter()
        .flat_map(|&(i, wi)| idx.iter().map(move |&(j, wj)| wi * wj * fit.covariance[i][j]))
        .sum();
    Ok((est, var.max(0.0).sqrt()))
}
