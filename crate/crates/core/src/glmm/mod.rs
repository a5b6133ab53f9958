//! Binomial-logit generalized linear mixed models with crossed random intercepts.

mod design;
mod fit;
mod inference;
pub mod optim;

pub use design::{
    build_design, grouping, interaction_column, method_column, Covariate, DesignMatrices, FixedTerm, ModelSpec,
    RandomBlock, RandomFactor, TermLayout, DISTANCE, INTERCEPT, QUALITY,
};
pub use fit::{fit, laplace_deviance, ConvergenceRecord, FitOptions, GlmmFit};
pub use inference::{
    decay_curve, derive_odds_ratios, normal_two_sided_p, wald_combination, wald_test, CurvePoint, DecayCurve,
    MethodOdds, OddsReport, RatioEstimate, WaldResult, Z_975,
};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GlmmError {
    #[error("InvalidSpec: {0}")]
    InvalidSpec(String),
    #[error("MissingCovariate: {0}")]
    MissingCovariate(&'static str),
    #[error("ReferenceMethodAbsent: {0}")]
    ReferenceMethodAbsent(String),
    #[error("RankDeficientDesign: {0}")]
    RankDeficientDesign(String),
    #[error("NonConvergence: {0}")]
    NonConvergence(String),
    #[error("CompleteSeparation: {0}")]
    CompleteSeparation(String),
    #[error("UnknownCoefficient: {0}")]
    UnknownCoefficient(String),
    #[error("ZeroVariance")]
    ZeroVariance,
    #[error("SpecMismatch: {0}")]
    SpecMismatch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
