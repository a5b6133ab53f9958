//! Clinical performance metrics and multi-comparison tests.

mod metrics;
mod tukey;
mod wilcoxon;

pub use metrics::{auc, confusion_metrics, midranks, Metric, MetricSet, Support};
pub use tukey::{one_way_anova, ptukey, qtukey, tukey_hsd, Anova, TukeyPair, TukeyResult};
pub use wilcoxon::{wilcoxon_signed_rank, Alternative, WilcoxonResult, EXACT_MAX_N};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StatsError {
    #[error("EmptySubset")]
    EmptySubset,
    #[error("AllZeroDiffs")]
    AllZeroDiffs,
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
    #[error("InvalidArgument: {0}")]
    InvalidArgument(String),
}
