//! Hierarchical Bayesian combination of scorers: model density, HMC,
//! convergence diagnostics and the predictive mixture.

mod diagnostics;
mod hmc;
mod loo;
mod model;
mod predict;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::data::DataError;

pub use diagnostics::{
    diagnose, diagnose_chains, diagnose_values, ess_bulk, split_rhat, DiagnosticsReport,
    ParameterDiagnostic, ESS_THRESHOLD, RHAT_THRESHOLD,
};
pub use hmc::{sample, ChainStats, PosteriorDraws, SamplerConfig, MAX_ENERGY_ERROR};
pub use loo::{calibrate, calibrate_loo, Calibration};
pub use model::{
    CellParams, ModelData, ModelSpec, ParameterVector, ScorerParams, CELL_DIM, GLOBAL_DIM,
    SCORER_DIM,
};
pub use predict::{predict, CandidateScores, Prediction};

#[derive(Debug, Error)]
pub enum BtbError {
    #[error("invalid model: {0}")]
    Spec(String),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
    #[error("held-out dataset `{0}` not found")]
    MissingDataset(String),
    #[error("unconstrained coordinate {0} is not finite")]
    NonFinite(usize),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error(
        "chain {chain}: {divergent} of {warmup} warmup transitions diverged (final step size {step_size:.3e})"
    )]
    Divergent {
        chain: usize,
        divergent: usize,
        warmup: usize,
        step_size: f64,
    },
    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),
    #[error(transparent)]
    Input(#[from] DataError),
}

/// Writes draws as long-format CSV with header `chain,draw,parameter,value`;
/// chains and draws are 0-based, parameters follow
/// [`ModelSpec::parameter_names`].
pub fn write_draws<W: Write>(draws: &PosteriorDraws, writer: W) -> Result<(), DataError> {
    let names = draws.spec.parameter_names();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["chain", "draw", "parameter", "value"])?;
    for (c, chain) in draws.chains.iter().enumerate() {
        for (i, p) in chain.iter().enumerate() {
            for (name, value) in names.iter().zip(p.flatten()) {
                w.write_record([c.to_string(), i.to_string(), name.clone(), value.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| DataError::io(Path::new("<draws>"), e))?;
    Ok(())
}

pub fn save_draws(draws: &PosteriorDraws, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    write_draws(draws, std::io::BufWriter::new(file))
}
