//! Report writers and helpers shared by the commands.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{CliError, RunConfig, Timings};
use crate::dataset::PredictionTable;
use crate::stats::confusion_metrics;

pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    Ok(csv::Writer::from_path(path)?)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Explicit choice if configured, else the method with the highest pooled
/// balanced accuracy (plain accuracy when a class is missing), ties by name.
pub(crate) fn reference_method(table: &PredictionTable, cfg: &RunConfig) -> Result<String, CliError> {
    let methods = table.methods();
    if let Some(r) = &cfg.reference_method {
        if !methods.contains(r) {
            return Err(CliError::Input(format!("ReferenceMethodAbsent: {r}")));
        }
        return Ok(r.clone());
    }
    let mut best: Option<(f64, &String)> = None;
    for m in &methods {
        let samples: Vec<(u8, f64)> = table
            .records()
            .iter()
            .filter(|r| &r.method == m)
            .map(|r| (r.label, r.score))
            .collect();
        let metrics = confusion_metrics(&samples, table.decision_threshold())?;
        let score = metrics.accuracy_balanced.unwrap_or(metrics.accuracy);
        if best.map_or(true, |(b, _)| score > b) {
            best = Some((score, m));
        }
    }
    best.map(|(_, m)| m.clone())
        .ok_or_else(|| CliError::Input("EmptyTable".into()))
}

#[derive(Debug, Serialize)]
pub(crate) struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<PathBuf>,
    pub config: Option<&'a RunConfig>,
    pub outputs: Vec<&'static str>,
    pub threads: usize,
    pub timings_ms: &'a Timings,
}

impl<'a> Manifest<'a> {
    pub(crate) fn new(command: &'static str, threads: usize, timings: &'a Timings) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: Vec::new(),
            config: None,
            outputs: Vec::new(),
            threads: if threads == 0 {
                rayon::current_num_threads()
            } else {
                threads
            },
            timings_ms: timings,
        }
    }
}
