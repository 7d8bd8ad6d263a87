//! Domain types, file ingestion, grouping and per-group normalization.

mod features;
mod tuples;

use std::path::Path;

use thiserror::Error;

pub use features::{
    decode_fset, encode_fset, load_features, read_feature_csv, save_fset, FeatureSet, FSET_MAGIC,
    FSET_VERSION,
};
pub use tuples::{
    load_tuples, read_tuples, save_tuples, write_tuples, z_normalize, GroupNormalization, Moments,
    TransferTuple, TupleTable, TUPLE_HEADER,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("cannot normalize {what} of group (scorer {scorer}, dataset {dataset}): zero variance")]
    Normalization {
        scorer: String,
        dataset: String,
        what: &'static str,
    },
    #[error("unknown scorer `{0}`")]
    UnknownScorer(String),
    #[error("dataset `{dataset}` has no metric for scorer `{scorer}`")]
    MissingMetric { scorer: String, dataset: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DataError {
    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

/// Paired (x, y) samples for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub dataset: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Group {
    pub fn new(dataset: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            dataset: dataset.into(),
            x,
            y,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Per-dataset paired (score, metric) vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupedSeries {
    pub groups: Vec<Group>,
}

impl GroupedSeries {
    pub fn new(groups: Vec<Group>) -> Self {
        Self { groups }
    }

    pub fn single(group: Group) -> Self {
        Self {
            groups: vec![group],
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Total number of (x, y) pairs over all groups.
    pub fn n_points(&self) -> usize {
        self.groups.iter().map(Group::len).sum()
    }
}

/// Collects, for one scorer, the (score, metric) pairs of every dataset in
/// table order.
pub fn group_by_dataset(table: &TupleTable, scorer: &str) -> Result<GroupedSeries, DataError> {
    if !table.scorers().iter().any(|s| s == scorer) {
        return Err(DataError::UnknownScorer(scorer.to_string()));
    }
    let mut groups: Vec<Group> = Vec::new();
    for dataset in table.datasets() {
        let mut group = Group::new(dataset.clone(), Vec::new(), Vec::new());
        for t in table
            .tuples()
            .iter()
            .filter(|t| t.scorer == scorer && &t.dataset == dataset)
        {
            let metric = t.metric.ok_or_else(|| DataError::MissingMetric {
                scorer: scorer.to_string(),
                dataset: dataset.clone(),
            })?;
            group.x.push(t.score);
            group.y.push(metric);
        }
        if !group.is_empty() {
            groups.push(group);
        }
    }
    Ok(GroupedSeries { groups })
}
