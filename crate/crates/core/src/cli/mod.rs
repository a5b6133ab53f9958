//! Command-line front end: argument parsing, dispatch and exit codes.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 empty analytical
//! result, 3 numerical failure.

mod config;
mod impact;
mod optimize;
mod output;
mod sensitivity;
mod simulate;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use config::{parse_region, DecayGrid, RunConfig, SCHEMA_VERSION};
pub use impact::cmd_impact;
pub use optimize::cmd_optimize;
pub use sensitivity::cmd_sensitivity;
pub use simulate::cmd_simulate;

use crate::dataset::{load_predictions, DatasetError, PredictionTable};
use crate::glmm::GlmmError;
use crate::pareto::ParetoError;
use crate::stats::StatsError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Empty(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("CSV error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("JSON error: {e}"))
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<GlmmError> for CliError {
    fn from(e: GlmmError) -> Self {
        match e {
            GlmmError::InvalidSpec(_)
            | GlmmError::MissingCovariate(_)
            | GlmmError::ReferenceMethodAbsent(_)
            | GlmmError::UnknownCoefficient(_)
            | GlmmError::SpecMismatch(_) => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ParetoError> for CliError {
    fn from(e: ParetoError) -> Self {
        match e {
            ParetoError::NoConfigMeetsConstraints | ParetoError::EmptyInput(_) => CliError::Empty(e.to_string()),
            ParetoError::Dataset(d) => d.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "acqsens", version, about = "Acquisition-parameter sensitivity analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Significance level, overriding the config file.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Seed override for simulation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the significance scan (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid search, Pareto layers and validated selection.
    Optimize {
        /// Prediction table (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Odds ratios and decay curves for a fixed region.
    Sensitivity {
        /// Prediction table (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Threshold region (JSON array or {"thresholds": [...]}).
        #[arg(long)]
        region: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Clinical metrics per quality group with Wilcoxon tests.
    Impact {
        /// Prediction table (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Threshold region (JSON array or {"thresholds": [...]}).
        #[arg(long)]
        region: PathBuf,
        /// Comma-separated methods; all methods when omitted.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a synthetic prediction table.
    Simulate {
        /// Simulation spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for data.csv and truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a prediction table and print a summary.
    Summarize {
        /// Prediction table (CSV).
        #[arg(long)]
        input: PathBuf,
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn load_config(path: &Path, global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::from_json(&read_text(path)?)?;
    if let Some(a) = global.alpha {
        cfg.alpha = a;
        cfg.validate()?;
    }
    Ok(cfg)
}

pub(crate) fn load_table(path: &Path, cfg: &RunConfig) -> Result<PredictionTable, CliError> {
    Ok(load_predictions(path, &cfg.space, cfg.load_options())?)
}

pub(crate) fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

/// Wall-clock timings, kept out of every report except the manifest.
#[derive(Debug, Default, Serialize)]
pub(crate) struct Timings(std::collections::BTreeMap<String, f64>);

impl Timings {
    pub(crate) fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.insert(stage.to_string(), start.elapsed().as_secs_f64() * 1e3);
        out
    }
}

fn summarize_cmd(input: &Path, config: &Path, global: &GlobalArgs) -> Result<(), CliError> {
    let cfg = load_config(config, global)?;
    let table = load_table(input, &cfg)?;
    let summary = crate::dataset::summarize(&table)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Runs a parsed command on a pool of `--threads` workers.
pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;
    let g = &cli.global;
    pool.install(|| match &cli.command {
        Command::Optimize { input, config, out } => cmd_optimize(input, config, out, g),
        Command::Sensitivity {
            input,
            config,
            region,
            out,
        } => cmd_sensitivity(input, config, region, out, g),
        Command::Impact {
            input,
            config,
            region,
            methods,
            out,
        } => cmd_impact(input, config, region, methods, out, g),
        Command::Simulate { spec, out } => cmd_simulate(spec, out, g),
        Command::Summarize { input, config } => summarize_cmd(input, config, g),
    })
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
