//! `impact`: clinical metrics per quality group and paired Wilcoxon tests.

use std::path::Path;

use log::warn;

use super::output::{csv_writer, num, opt, write_json, Manifest};
use super::{load_config, load_table, parse_region, prepare_out, read_text, CliError, GlobalArgs, Timings};
use crate::quality::{label_quality, Quality};
use crate::stats::{confusion_metrics, wilcoxon_signed_rank, Alternative, Metric, MetricSet, StatsError};

const GROUPS: [&str; 3] = ["HQ", "LQ", "ALL"];
/// Paired one-sided comparisons: the first group is hypothesized to score higher.
const COMPARISONS: [(usize, usize); 3] = [(0, 1), (0, 2), (2, 1)];

pub fn cmd_impact(
    input: &Path,
    config: &Path,
    region: &Path,
    methods: &[String],
    out: &Path,
    global: &GlobalArgs,
) -> Result<(), CliError> {
    let mut timings = Timings::default();
    let cfg = load_config(config, global)?;
    let mut table = timings.time("load", || load_table(input, &cfg))?;
    let region = parse_region(&read_text(region)?, &cfg.space)?;
    if !methods.is_empty() {
        table = table.filter_methods(methods)?;
    }
    prepare_out(out)?;
    let methods = table.methods();
    let threshold = table.decision_threshold();

    // metrics[method][group]
    let mut metrics: Vec<[Option<MetricSet>; 3]> = Vec::with_capacity(methods.len());
    for m in &methods {
        let mut samples: [Vec<(u8, f64)>; 3] = Default::default();
        for r in table.records().iter().filter(|r| &r.method == m) {
            let g = match label_quality(&r.params, &region, table.space())? {
                Quality::High => 0,
                Quality::Low => 1,
            };
            samples[g].push((r.label, r.score));
            samples[2].push((r.label, r.score));
        }
        let mut row: [Option<MetricSet>; 3] = Default::default();
        for (g, s) in samples.iter().enumerate() {
            row[g] = match confusion_metrics(s, threshold) {
                Ok(ms) => Some(ms),
                Err(StatsError::EmptySubset) => {
                    warn!("method {m} has no {} records", GROUPS[g]);
                    None
                }
                Err(e) => return Err(e.into()),
            };
        }
        metrics.push(row);
    }

    let mut w = csv_writer(&out.join("metrics.csv"))?;
    let mut header = vec!["method".to_string(), "quality".to_string()];
    header.extend(Metric::ALL.iter().map(|m| m.name().to_string()));
    header.extend(["accuracy", "tp", "fp", "tn", "fn", "n"].map(String::from));
    w.write_record(&header)?;
    for (m, row) in methods.iter().zip(&metrics) {
        for (g, ms) in row.iter().enumerate() {
            let mut rec = vec![m.clone(), GROUPS[g].to_string()];
            match ms {
                Some(ms) => {
                    rec.extend(Metric::ALL.iter().map(|&k| opt(ms.get(k))));
                    let s = ms.support;
                    rec.push(num(ms.accuracy));
                    rec.extend([s.tp, s.fp, s.tn, s.fn_, s.n].map(|c| c.to_string()));
                }
                None => {
                    rec.extend(std::iter::repeat(String::new()).take(Metric::ALL.len() + 1));
                    rec.extend(["0"; 5].map(String::from));
                }
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let values = |g: usize, k: Metric| -> Vec<f64> {
        metrics
            .iter()
            .filter_map(|row| row[g].as_ref().and_then(|ms| ms.get(k)))
            .collect()
    };
    let mut w = csv_writer(&out.join("metrics_summary.csv"))?;
    w.write_record(["quality", "metric", "mean", "sd", "n_methods"])?;
    for (g, name) in GROUPS.iter().enumerate() {
        for &k in &Metric::ALL {
            let v = values(g, k);
            let n = v.len();
            let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
            let sd = mean
                .filter(|_| n > 1)
                .map(|mu| (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
            w.write_record([
                name.to_string(),
                k.name().to_string(),
                opt(mean),
                opt(sd),
                n.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("wilcoxon.csv"))?;
    w.write_record(["metric", "greater", "lesser", "n", "statistic", "p_value", "exact"])?;
    if methods.len() < 2 {
        warn!("Wilcoxon tests skipped: {} method(s), at least 2 needed", methods.len());
    } else {
        for &k in &Metric::ALL {
            for (a, b) in COMPARISONS {
                let diffs: Vec<f64> = metrics
                    .iter()
                    .filter_map(|row| {
                        let x = row[a].as_ref()?.get(k)?;
                        let y = row[b].as_ref()?.get(k)?;
                        Some(x - y)
                    })
                    .collect();
                if diffs.is_empty() {
                    warn!("{} unavailable for {}>{}; test skipped", k.name(), GROUPS[a], GROUPS[b]);
                    continue;
                }
                let result = match wilcoxon_signed_rank(&diffs, Alternative::Greater) {
                    Ok(r) => r,
                    Err(e) => {
                        warn!("{} {}>{}: {e}", k.name(), GROUPS[a], GROUPS[b]);
                        continue;
                    }
                };
                w.write_record([
                    k.name().to_string(),
                    GROUPS[a].to_string(),
                    GROUPS[b].to_string(),
                    result.n.to_string(),
                    num(result.statistic),
                    num(result.p_value),
                    result.exact.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv_writer(&out.join("boxplot.csv"))?;
    w.write_record(["metric", "quality", "method", "value"])?;
    for &k in &Metric::ALL {
        for (g, name) in GROUPS.iter().enumerate() {
            for (m, row) in methods.iter().zip(&metrics) {
                if let Some(v) = row[g].as_ref().and_then(|ms| ms.get(k)) {
                    w.write_record([k.name().to_string(), name.to_string(), m.clone(), num(v)])?;
                }
            }
        }
    }
    w.flush()?;

    let mut manifest = Manifest::new("impact", global.threads, &timings);
    manifest.inputs = vec![input.to_path_buf(), config.to_path_buf()];
    manifest.config = Some(&cfg);
    manifest.outputs = vec![
        "metrics.csv",
        "metrics_summary.csv",
        "wilcoxon.csv",
        "boxplot.csv",
        "manifest.json",
    ];
    write_json(&out.join("manifest.json"), &manifest)
}
