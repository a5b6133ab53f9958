//! Sensitivity of predictive models to acquisition parameters.
//!
//! The crate fits logistic mixed-effects models of per-case prediction failure
//! against high/low quality labelings of an acquisition parameter space,
//! searches the threshold grid for significant configurations, peels them into
//! Pareto layers and validates candidates with clinical metrics and
//! multi-comparison tests.

pub mod cli;
pub mod dataset;
pub mod glmm;
pub mod pareto;
pub mod quality;
pub mod stats;
pub mod synth;

pub use dataset::{Axis, Direction, LoadOptions, ParameterSpace, PredictionRecord, PredictionTable};
pub use quality::{Quality, ThresholdConfig};
