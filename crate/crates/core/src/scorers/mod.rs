//! Transferability scorers computed from a [`FeatureSet`].
//!
//! Every scorer is oriented so that larger values predict better transfer.

mod gbc;
mod hscore;
mod label;
mod logme;
mod parc;

use thiserror::Error;

use crate::data::FeatureSet;

pub use gbc::{bhattacharyya_diagonal, gbc, VARIANCE_FLOOR};
pub use hscore::{
    class_covariances, h_score, ledoit_wolf_shrinkage, regularized_h_score,
    regularized_h_score_with, Shrinkage,
};
pub use label::{leep, nce};
pub use logme::{fit_evidence, logme, EvidenceFit, LOGME_MAX_ITER, LOGME_TOL};
pub use parc::parc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScorerKind {
    HScore,
    RegularizedHScore,
    LogMe,
    Nce,
    Leep,
    Gbc,
    Parc,
}

impl ScorerKind {
    pub const ALL: [ScorerKind; 7] = [
        ScorerKind::HScore,
        ScorerKind::RegularizedHScore,
        ScorerKind::LogMe,
        ScorerKind::Nce,
        ScorerKind::Leep,
        ScorerKind::Gbc,
        ScorerKind::Parc,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ScorerKind::HScore => "h_score",
            ScorerKind::RegularizedHScore => "reg_h_score",
            ScorerKind::LogMe => "logme",
            ScorerKind::Nce => "nce",
            ScorerKind::Leep => "leep",
            ScorerKind::Gbc => "gbc",
            ScorerKind::Parc => "parc",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    /// Whether the scorer consumes source-class probabilities.
    pub fn needs_source_probs(&self) -> bool {
        matches!(self, ScorerKind::Nce | ScorerKind::Leep)
    }

    pub fn score(&self, fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
        match self {
            ScorerKind::HScore => h_score(fs),
            ScorerKind::RegularizedHScore => regularized_h_score(fs),
            ScorerKind::LogMe => logme(fs),
            ScorerKind::Nce => nce(fs),
            ScorerKind::Leep => leep(fs),
            ScorerKind::Gbc => gbc(fs),
            ScorerKind::Parc => parc(fs),
        }
    }
}

impl std::fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// Raw (unnormalized) output of one scorer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRecord {
    pub scorer: ScorerKind,
    pub value: f64,
    pub higher_is_better: bool,
}

impl ScoreRecord {
    pub(crate) fn new(scorer: ScorerKind, value: f64) -> Result<Self, ScorerError> {
        if !value.is_finite() {
            return Err(ScorerError::Numerical(format!("{scorer} produced {value}")));
        }
        Ok(Self {
            scorer,
            value,
            higher_is_better: true,
        })
    }
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("feature matrix is empty")]
    EmptyFeatures,
    #[error("need at least 2 classes, found {0}")]
    SingleClass(usize),
    #[error("need at least {needed} samples, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("class {class} has {count} samples, need at least 2")]
    ClassTooSmall { class: usize, count: usize },
    #[error("source probabilities are required")]
    MissingSourceProbs,
    #[error("feature row {0} has zero variance")]
    ZeroVarianceRow(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{scorer}: {source}")]
    Scorer {
        scorer: ScorerKind,
        #[source]
        source: Box<ScorerError>,
    },
}

impl ScorerError {
    /// The scorer named in a [`ScorerError::Scorer`] wrapper.
    pub fn scorer(&self) -> Option<ScorerKind> {
        match self {
            ScorerError::Scorer { scorer, .. } => Some(*scorer),
            _ => None,
        }
    }
}

pub(crate) fn require_classes(fs: &FeatureSet) -> Result<(), ScorerError> {
    if fs.n_samples() == 0 || fs.n_features() == 0 {
        return Err(ScorerError::EmptyFeatures);
    }
    if fs.n_classes() < 2 {
        return Err(ScorerError::SingleClass(fs.n_classes()));
    }
    Ok(())
}

/// Runs the requested scorers in request order.
pub fn score_all(fs: &FeatureSet, which: &[ScorerKind]) -> Result<Vec<ScoreRecord>, ScorerError> {
    which
        .iter()
        .map(|kind| {
            kind.score(fs).map_err(|e| ScorerError::Scorer {
                scorer: *kind,
                source: Box::new(e),
            })
        })
        .collect()
}
