//! Calibration/benchmark tuples and their CSV form.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::DataError;

/// Header of the tuple CSV, in column order.
pub const TUPLE_HEADER: [&str; 5] = ["dataset", "architecture", "scorer", "score", "metric"];

/// One (architecture, dataset, scorer, score, metric) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferTuple {
    pub architecture: String,
    pub dataset: String,
    pub scorer: String,
    /// Raw scorer output.
    pub score: f64,
    /// Ground-truth test metric in `[0, 1]`; absent for prediction-time tuples.
    pub metric: Option<f64>,
}

/// Mean and population standard deviation of one normalized quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            sd: var.sqrt(),
        }
    }

    /// Maps a raw value into the normalized space.
    pub fn apply(&self, value: f64) -> f64 {
        (value - self.mean) / self.sd
    }
}

/// Constants used to normalize one (scorer, dataset) group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupNormalization {
    pub score: Moments,
    pub metric: Option<Moments>,
}

/// An ordered table of [`TransferTuple`]s with unique
/// (architecture, dataset, scorer) keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TupleTable {
    tuples: Vec<TransferTuple>,
    datasets: Vec<String>,
    scorers: Vec<String>,
    normalization: Option<BTreeMap<(String, String), GroupNormalization>>,
}

impl TupleTable {
    /// Builds a table, validating key uniqueness and metric range.
    pub fn new(tuples: Vec<TransferTuple>) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(tuples.len());
        for t in &tuples {
            if !t.score.is_finite() {
                return Err(DataError::Validation(format!(
                    "non-finite score for ({}, {}, {})",
                    t.architecture, t.dataset, t.scorer
                )));
            }
            if let Some(m) = t.metric {
                if !(0.0..=1.0).contains(&m) {
                    return Err(DataError::Validation(format!(
                        "metric {m} outside [0, 1] for ({}, {}, {})",
                        t.architecture, t.dataset, t.scorer
                    )));
                }
            }
            if !seen.insert((&t.architecture, &t.dataset, &t.scorer)) {
                return Err(DataError::Validation(format!(
                    "duplicate key ({}, {}, {})",
                    t.architecture, t.dataset, t.scorer
                )));
            }
        }
        Ok(Self::from_validated(tuples))
    }

    fn from_validated(tuples: Vec<TransferTuple>) -> Self {
        let datasets = first_appearance(tuples.iter().map(|t| t.dataset.as_str()));
        let scorers = first_appearance(tuples.iter().map(|t| t.scorer.as_str()));
        Self {
            tuples,
            datasets,
            scorers,
            normalization: None,
        }
    }

    pub fn tuples(&self) -> &[TransferTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Dataset ids in order of first appearance.
    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    /// Scorer ids in order of first appearance.
    pub fn scorers(&self) -> &[String] {
        &self.scorers
    }

    /// Normalization constants per (scorer, dataset), present after
    /// [`z_normalize`].
    pub fn normalization(&self) -> Option<&BTreeMap<(String, String), GroupNormalization>> {
        self.normalization.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalization.is_some()
    }

    /// Keeps the tuples matching `keep`, preserving order. Normalization
    /// constants are dropped.
    pub fn filter<F>(&self, keep: F) -> Self
    where
        F: Fn(&TransferTuple) -> bool,
    {
        Self::from_validated(self.tuples.iter().filter(|t| keep(t)).cloned().collect())
    }

    /// Copy with every metric removed.
    pub fn without_metrics(&self) -> Self {
        Self::from_validated(
            self.tuples
                .iter()
                .map(|t| TransferTuple {
                    metric: None,
                    ..t.clone()
                })
                .collect(),
        )
    }

    /// Indices of tuples grouped by (scorer, dataset), groups in order of
    /// first appearance.
    pub fn group_indices(&self) -> Vec<((String, String), Vec<usize>)> {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut members: HashMap<(String, String), Vec<usize>> = HashMap::new();
        for (i, t) in self.tuples.iter().enumerate() {
            let key = (t.scorer.clone(), t.dataset.clone());
            members
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(i);
        }
        order
            .into_iter()
            .map(|k| {
                let idx = members.remove(&k).unwrap_or_default();
                (k, idx)
            })
            .collect()
    }
}

fn first_appearance<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for id in ids {
        if seen.insert(id) {
            out.push(id.to_string());
        }
    }
    out
}

/// Reads a tuple table from CSV text.
pub fn read_tuples<R: Read>(reader: R) -> Result<TupleTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != TUPLE_HEADER {
        return Err(DataError::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                TUPLE_HEADER.join(","),
                names.join(",")
            ),
        });
    }

    let mut tuples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let score: f64 = field(3).parse().map_err(|_| DataError::Parse {
            line,
            message: format!("invalid score `{}`", field(3)),
        })?;
        let metric = match field(4) {
            "" => None,
            raw => Some(raw.parse::<f64>().map_err(|_| DataError::Parse {
                line,
                message: format!("invalid metric `{raw}`"),
            })?),
        };
        tuples.push(TransferTuple {
            dataset: field(0).to_string(),
            architecture: field(1).to_string(),
            scorer: field(2).to_string(),
            score,
            metric,
        });
    }
    TupleTable::new(tuples)
}

/// Loads a tuple CSV from disk.
pub fn load_tuples(path: impl AsRef<Path>) -> Result<TupleTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    read_tuples(file)
}

/// Writes a table as tuple CSV. Floats use the shortest representation
/// that parses back to the same value.
pub fn write_tuples<W: Write>(table: &TupleTable, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(TUPLE_HEADER)?;
    for t in table.tuples() {
        let metric = t.metric.map(|m| m.to_string()).unwrap_or_default();
        wtr.write_record([
            t.dataset.as_str(),
            t.architecture.as_str(),
            t.scorer.as_str(),
            &t.score.to_string(),
            &metric,
        ])?;
    }
    wtr.flush().map_err(|e| DataError::Io {
        path: "<writer>".into(),
        message: e.to_string(),
    })
}

pub fn save_tuples(table: &TupleTable, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    write_tuples(table, std::io::BufWriter::new(file))
}

/// Z-normalizes scores (and metrics, when present) within every
/// (scorer, dataset) group using the population standard deviation.
///
/// A group must have either all or none of its metrics. The constants used
/// are kept on the returned table.
pub fn z_normalize(table: &TupleTable) -> Result<TupleTable, DataError> {
    let mut tuples = table.tuples.clone();
    let mut constants = BTreeMap::new();
    for ((scorer, dataset), idx) in table.group_indices() {
        let scores: Vec<f64> = idx.iter().map(|&i| tuples[i].score).collect();
        let score = Moments::of(&scores);
        if !(score.sd > 0.0) {
            return Err(DataError::Normalization {
                scorer,
                dataset,
                what: "score",
            });
        }
        let present = idx.iter().filter(|&&i| tuples[i].metric.is_some()).count();
        let metric = if present == 0 {
            None
        } else if present < idx.len() {
            return Err(DataError::Validation(format!(
                "group ({scorer}, {dataset}) mixes present and missing metrics"
            )));
        } else {
            let metrics: Vec<f64> = idx.iter().filter_map(|&i| tuples[i].metric).collect();
            let m = Moments::of(&metrics);
            if !(m.sd > 0.0) {
                return Err(DataError::Normalization {
                    scorer,
                    dataset,
                    what: "metric",
                });
            }
            Some(m)
        };
        for &i in &idx {
            let t = &mut tuples[i];
            t.score = score.apply(t.score);
            if let (Some(m), Some(value)) = (metric, t.metric) {
                t.metric = Some(m.apply(value));
            }
        }
        constants.insert((scorer, dataset), GroupNormalization { score, metric });
    }
    let mut out = TupleTable::from_validated(tuples);
    out.normalization = Some(constants);
    Ok(out)
}
