//! Rank-correlation statistics and the seeded bootstrap engine.

mod bootstrap;
mod tau;

use thiserror::Error;

pub use bootstrap::{
    bootstrap, bootstrap_with, iteration_rng, percentile_sorted, resample, BootstrapConfig,
    BootstrapSummary, Resampling, Statistic,
};
pub use tau::{
    aggregated_weighted_tau, average_ranks, averaged_weighted_tau, hyperbolic, kendall_tau,
    pearson_r, rank_weights, spearman_rho, weighted_tau, weighted_tau_with, TauResult,
};

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
    #[error("no groups")]
    NoGroups,
    #[error("group `{dataset}` has {len} samples, need at least 2")]
    UndersizedGroup { dataset: String, len: usize },
    #[error("statistic needs exactly one group, got {0}")]
    SingleGroupRequired(usize),
    #[error("bootstrap failed: {0}")]
    Bootstrap(String),
}
