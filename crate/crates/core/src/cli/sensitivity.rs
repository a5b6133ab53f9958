//! `sensitivity`: method-specific odds ratios and distance decay for one region.

use std::path::Path;

use log::warn;
use serde::Serialize;

use super::output::{csv_writer, num, reference_method, write_json, Manifest};
use super::{load_config, load_table, parse_region, prepare_out, read_text, CliError, GlobalArgs, Timings};
use crate::dataset::PredictionTable;
use crate::glmm::{
    build_design, decay_curve, derive_odds_ratios, fit, wald_test, DecayCurve, FitOptions, GlmmFit, ModelSpec,
    OddsReport, RandomFactor, RatioEstimate, DISTANCE, INTERCEPT,
};
use crate::quality::{label_quality, signed_distance, ThresholdConfig};

#[derive(Debug, Serialize)]
struct CoefficientRow {
    name: String,
    estimate: f64,
    std_error: f64,
    z: Option<f64>,
    p_value: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    coefficients: Vec<CoefficientRow>,
    variance_components: std::collections::BTreeMap<String, f64>,
    loglik: f64,
    converged: bool,
    n_obs: usize,
}

impl ModelSummary {
    fn from_fit(f: &GlmmFit) -> Self {
        let coefficients = f
            .coefficient_names
            .iter()
            .map(|name| {
                let w = wald_test(f, name).ok();
                CoefficientRow {
                    name: name.clone(),
                    estimate: f.coefficient(name).unwrap_or(f64::NAN),
                    std_error: f.std_error(name).unwrap_or(f64::NAN),
                    z: w.map(|w| w.z),
                    p_value: w.map(|w| w.p_two_sided),
                }
            })
            .collect();
        ModelSummary {
            coefficients,
            variance_components: f.variance_components.clone(),
            loglik: f.loglik,
            converged: f.converged,
            n_obs: f.n_obs,
        }
    }
}

/// Population distance model in its fixed reporting shape.
#[derive(Debug, Serialize)]
struct PopulationModel {
    beta0: f64,
    beta1: f64,
    sigma_method: f64,
    sigma_case: f64,
    p_beta1: f64,
}

#[derive(Debug, Serialize)]
struct DistanceReport {
    region: ThresholdConfig,
    reference_method: Option<String>,
    population: PopulationModel,
    population_fit: ModelSummary,
    method_specific: Option<ModelSummary>,
    quality_model: Option<ModelSummary>,
}

fn fit_model(table: &PredictionTable, spec: &ModelSpec, q: &[u8], d: &[f64], firth: bool) -> Result<GlmmFit, CliError> {
    let design = build_design(table, spec, Some(q), Some(d))?;
    let f = fit(
        &design,
        &FitOptions {
            firth,
            ..Default::default()
        },
    )?;
    if !f.converged {
        warn!("model {:?} did not converge", spec.fixed_terms);
    }
    Ok(f)
}

/// Tag before the first ':' of a method name, e.g. `glcm:svm` -> `glcm`.
fn representation(method: &str) -> &str {
    method.split_once(':').map_or("", |(tag, _)| tag)
}

fn ratio_cells(r: Option<&RatioEstimate>) -> [String; 4] {
    match r {
        Some(r) => [num(r.estimate), num(r.ci_low), num(r.ci_high), num(r.p_value)],
        None => Default::default(),
    }
}

fn write_or_table(path: &Path, report: &OddsReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "representation",
        "method",
        "is_reference",
        "odds_hq",
        "odds_lq",
        "or_n",
        "or_n_ci_low",
        "or_n_ci_high",
        "p_or_n",
        "or_hq_vs_ref",
        "or_hq_vs_ref_ci_low",
        "or_hq_vs_ref_ci_high",
        "p_or_hq_vs_ref",
        "or_lq_vs_ref",
        "or_lq_vs_ref_ci_low",
        "or_lq_vs_ref_ci_high",
        "p_or_lq_vs_ref",
    ])?;
    for m in &report.methods {
        let mut row = vec![
            representation(&m.method).to_string(),
            m.method.clone(),
            m.is_reference.to_string(),
            num(m.odds_hq),
            num(m.odds_lq),
        ];
        row.extend(ratio_cells(Some(&m.or_quality)));
        row.extend(ratio_cells(m.or_hq_vs_reference.as_ref()));
        row.extend(ratio_cells(m.or_lq_vs_reference.as_ref()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_decay(path: &Path, curves: &[(&str, Vec<DecayCurve>)]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["model", "method", "d_q", "probability", "ci_low", "ci_high"])?;
    for (model, series) in curves {
        for c in series {
            for p in &c.points {
                w.write_record([
                    model.to_string(),
                    c.method.clone(),
                    num(p.d_q),
                    num(p.probability),
                    num(p.ci_low),
                    num(p.ci_high),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sensitivity(
    input: &Path,
    config: &Path,
    region: &Path,
    out: &Path,
    global: &GlobalArgs,
) -> Result<(), CliError> {
    let mut timings = Timings::default();
    let cfg = load_config(config, global)?;
    let table = timings.time("load", || load_table(input, &cfg))?;
    let region = parse_region(&read_text(region)?, &cfg.space)?;
    prepare_out(out)?;
    let space = table.space();
    let mut q = Vec::with_capacity(table.len());
    let mut d = Vec::with_capacity(table.len());
    for r in table.records() {
        q.push(label_quality(&r.params, &region, space)?.code());
        d.push(signed_distance(&r.params, &region, space)?);
    }
    let multi = table.methods().len() >= 2;
    let reference = if multi {
        Some(reference_method(&table, &cfg)?)
    } else {
        None
    };

    let (quality_fit, method_fit) = timings.time("method_models", || -> Result<_, CliError> {
        match &reference {
            Some(r) => Ok((
                Some(fit_model(
                    &table,
                    &ModelSpec::quality_by_method(r.clone()),
                    &q,
                    &d,
                    cfg.firth,
                )?),
                Some(fit_model(
                    &table,
                    &ModelSpec::distance_by_method(r.clone()),
                    &q,
                    &d,
                    cfg.firth,
                )?),
            )),
            None => {
                warn!("single method: method-specific models skipped");
                Ok((None, None))
            }
        }
    })?;
    let mut pop_spec = ModelSpec::distance_population();
    if !multi {
        pop_spec.random_intercepts.retain(|f| *f != RandomFactor::Method);
    }
    let population_fit = timings.time("population_model", || fit_model(&table, &pop_spec, &q, &d, cfg.firth))?;

    let odds = match &quality_fit {
        Some(f) => derive_odds_ratios(f)?,
        None => {
            let single = fit_model(&table, &ModelSpec::quality_single(), &q, &d, cfg.firth)?;
            derive_odds_ratios(&single)?
        }
    };
    write_or_table(&out.join("or_table.csv"), &odds)?;

    let p_beta1 = wald_test(&population_fit, DISTANCE)?.p_two_sided;
    let population = PopulationModel {
        beta0: population_fit.coefficient(INTERCEPT).unwrap_or(f64::NAN),
        beta1: population_fit.coefficient(DISTANCE).unwrap_or(f64::NAN),
        sigma_method: population_fit.sigma(RandomFactor::Method.name()).unwrap_or(0.0),
        sigma_case: population_fit.sigma(RandomFactor::CaseId.name()).unwrap_or(0.0),
        p_beta1,
    };
    let report = DistanceReport {
        region: region.clone(),
        reference_method: reference,
        population,
        population_fit: ModelSummary::from_fit(&population_fit),
        method_specific: method_fit.as_ref().map(ModelSummary::from_fit),
        quality_model: quality_fit.as_ref().map(ModelSummary::from_fit),
    };
    write_json(&out.join("distance_model.json"), &report)?;

    let grid = cfg.decay_grid.values();
    let mut curves = vec![("population", decay_curve(&population_fit, &grid)?)];
    if let Some(f) = &method_fit {
        curves.push(("method_specific", decay_curve(f, &grid)?));
    }
    write_decay(&out.join("decay_curve.csv"), &curves)?;

    let mut manifest = Manifest::new("sensitivity", global.threads, &timings);
    manifest.inputs = vec![input.to_path_buf(), config.to_path_buf()];
    manifest.config = Some(&cfg);
    manifest.outputs = vec![
        "or_table.csv",
        "distance_model.json",
        "decay_curve.csv",
        "manifest.json",
    ];
    write_json(&out.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::representation;

    #[test]
    fn representation_tags() {
        assert_eq!(representation("glcm:svm"), "glcm");
        assert_eq!(representation("resnet"), "");
    }
}
