//! `simulate`: draw a synthetic table and its ground truth.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::output::write_json;
use super::{prepare_out, read_text, CliError, GlobalArgs};
use crate::dataset::write_predictions;
use crate::synth::{generate, SimSpec};

pub fn cmd_simulate(spec: &Path, out: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let mut spec: SimSpec =
        serde_json::from_str(&read_text(spec)?).map_err(|e| CliError::Input(format!("InvalidSpec: {e}")))?;
    if let Some(seed) = global.seed {
        spec.seed = seed;
    }
    let (table, truth) = generate(&spec)?;
    prepare_out(out)?;
    let file = File::create(out.join("data.csv"))?;
    write_predictions(&table, BufWriter::new(file))?;
    write_json(&out.join("truth.json"), &truth)
}
