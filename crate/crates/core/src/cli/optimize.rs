//! `optimize`: grid scan, Pareto layers and validated selection.

use std::path::Path;

use log::{info, warn};

use super::output::{csv_writer, num, opt, write_json, Manifest};
use super::{load_config, load_table, prepare_out, CliError, GlobalArgs, Timings};
use crate::glmm::FitOptions;
use crate::pareto::significance_scan;
use crate::pareto::{
    grid_candidates, pareto_decompose, select_configurations, CandidateResult, ScanOptions, SelectionReport,
};

fn write_candidates(path: &Path, axes: &[String], results: &[CandidateResult]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = axes.to_vec();
    header.extend(
        [
            "status",
            "beta1",
            "std_error",
            "p_value",
            "p_adjusted",
            "n_hq",
            "n_lq",
            "converged",
            "significant",
            "message",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in results {
        let mut row: Vec<String> = r.config.values().iter().map(|&v| num(v)).collect();
        row.extend([
            r.status.as_str().to_string(),
            opt(r.beta1),
            opt(r.std_error),
            opt(r.p_value),
            opt(r.p_adjusted),
            r.n_hq.to_string(),
            r.n_lq.to_string(),
            r.converged.to_string(),
            r.significant.to_string(),
            r.message.clone().unwrap_or_default(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_selection(path: &Path, report: &SelectionReport) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "rank", "layer", "region", "group1", "group2", "meandiff", "ci_low", "ci_high", "p_adj", "reject", "valid",
    ])?;
    for e in &report.entries {
        let rank = e.rank.map(|r| r.to_string()).unwrap_or_default();
        let region = e.config.to_string();
        if e.pairs.is_empty() {
            w.write_record([
                rank.as_str(),
                &e.layer.to_string(),
                &region,
                "",
                "",
                "",
                "",
                "",
                "",
                "",
                &e.valid.to_string(),
            ])?;
        }
        for p in &e.pairs {
            w.write_record([
                rank.clone(),
                e.layer.to_string(),
                region.clone(),
                p.group1.clone(),
                p.group2.clone(),
                num(p.meandiff),
                num(p.ci_low),
                num(p.ci_high),
                num(p.p_adj),
                p.reject.to_string(),
                e.valid.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_optimize(input: &Path, config: &Path, out: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let mut timings = Timings::default();
    let cfg = load_config(config, global)?;
    let table = timings.time("load", || load_table(input, &cfg))?;
    prepare_out(out)?;
    let grid_space = cfg.grid_space()?;
    let candidates = grid_candidates(&grid_space);
    info!("scanning {} candidate configurations", candidates.len());
    let options = ScanOptions {
        alpha: cfg.alpha,
        min_group: cfg.min_group,
        benjamini_hochberg: cfg.benjamini_hochberg,
        fit: FitOptions {
            firth: cfg.firth,
            ..Default::default()
        },
    };
    let results = timings.time("scan", || significance_scan(&table, &candidates, &cfg.space, &options))?;
    let axes: Vec<String> = cfg.space.axes().iter().map(|a| a.name.clone()).collect();
    write_candidates(&out.join("candidates.csv"), &axes, &results)?;
    let failed = results.iter().filter(|r| r.p_value.is_some() && !r.converged).count();
    if failed > 0 {
        warn!("{failed} candidate fits did not converge");
    }

    let mut manifest = Manifest::new("optimize", global.threads, &timings);
    manifest.inputs = vec![input.to_path_buf(), config.to_path_buf()];
    manifest.outputs.push("candidates.csv");

    let outcome = (|| {
        let layers = pareto_decompose(&results, &cfg.space, cfg.reverse_dominance)?;
        write_json(&out.join("layers.json"), &layers)?;
        let report = select_configurations(&layers, &table, &cfg.constraints, cfg.alpha)?;
        write_selection(&out.join("selection.csv"), &report)?;
        write_json(&out.join("selection.json"), &report)?;
        Ok::<_, CliError>((layers.len(), report))
    })();
    match &outcome {
        Ok((n_layers, report)) => {
            manifest
                .outputs
                .extend(["layers.json", "selection.csv", "selection.json"]);
            info!(
                "{n_layers} Pareto layers, {} of {} configurations valid",
                report.valid().count(),
                report.entries.len()
            );
        }
        Err(e) => warn!("{e}"),
    }
    manifest.config = Some(&cfg);
    manifest.outputs.push("manifest.json");
    write_json(&out.join("manifest.json"), &manifest)?;
    outcome.map(|_| ())
}
