use std::fmt;
use std::path::Path;

use transfer_bench::btb::BtbError;
use transfer_bench::data::DataError;
use transfer_bench::rank::RankError;
use transfer_bench::scorers::ScorerError;

/// Error carrying the process exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration (exit 2).
    Input(String),
    /// Inference ran but its diagnostics are unacceptable (exit 3).
    Diagnostics(String),
    /// Anything else (exit 1).
    Internal(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn write(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Internal(format!("cannot write {}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Diagnostics(_) => 3,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Diagnostics(m) => write!(f, "diagnostics failure: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RankError> for CliError {
    fn from(e: RankError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BtbError> for CliError {
    fn from(e: BtbError) -> Self {
        match e {
            BtbError::Divergent { .. } | BtbError::Sampling(_) => CliError::Diagnostics(e.to_string()),
            BtbError::NonFinite(_) | BtbError::InsufficientDraws(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
