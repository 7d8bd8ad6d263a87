//! `score`: run scorers over a directory of feature files.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use transfer_bench::data::{load_features, write_tuples, TransferTuple, TupleTable};
use transfer_bench::scorers::{score_all, ScorerKind};

use crate::error::CliError;
use crate::options::RunConfig;
use crate::output::write_atomic;

/// A feature file and the (dataset, architecture) encoded in its name.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub path: PathBuf,
    pub dataset: String,
    pub architecture: String,
}

/// Parses `<dataset>__<arch>.fset` (or `.csv`).
pub fn parse_name(path: &Path) -> Option<FeatureFile> {
    let ext = path.extension()?.to_str()?;
    if !ext.eq_ignore_ascii_case("fset") && !ext.eq_ignore_ascii_case("csv") {
        return None;
    }
    let stem = path.file_stem()?.to_str()?;
    let (dataset, architecture) = stem.split_once("__")?;
    if dataset.is_empty() || architecture.is_empty() {
        return None;
    }
    Some(FeatureFile {
        path: path.to_path_buf(),
        dataset: dataset.to_string(),
        architecture: architecture.to_string(),
    })
}

/// Feature files of `dir`, sorted by file name.
pub fn feature_files(dir: &Path) -> Result<Vec<FeatureFile>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::input(e.to_string()))?.path();
        if path.is_file() {
            if let Some(f) = parse_name(&path) {
                files.push(f);
            }
        }
    }
    files.sort_by(|a, b| a.path.file_name().cmp(&b.path.file_name()));
    if files.is_empty() {
        return Err(CliError::input(format!(
            "no `<dataset>__<arch>.fset` files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Reads a `dataset,architecture,metric` CSV.
pub fn load_metrics(path: &Path) -> Result<HashMap<(String, String), f64>, CliError> {
    let bad = |msg: String| CliError::input(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["dataset", "architecture", "metric"] {
        return Err(bad("expected header `dataset,architecture,metric`".into()));
    }
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let metric: f64 = record[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("line {line}: invalid metric `{}`", &record[2])))?;
        let key = (record[0].trim().to_string(), record[1].trim().to_string());
        if out.insert(key, metric).is_some() {
            return Err(bad(format!("line {line}: duplicate (dataset, architecture)")));
        }
    }
    Ok(out)
}

pub fn scorer_kinds(ids: &[String]) -> Result<Vec<ScorerKind>, CliError> {
    if ids.is_empty() {
        return Ok(ScorerKind::ALL.to_vec());
    }
    ids.iter()
        .map(|id| {
            ScorerKind::from_id(id).ok_or_else(|| {
                let known: Vec<&str> = ScorerKind::ALL.iter().map(|k| k.id()).collect();
                CliError::input(format!("unknown scorer `{id}` (known: {})", known.join(", ")))
            })
        })
        .collect()
}

/// Scores every feature file and writes `out/scores/tuples.csv`. On failure
/// no tuple file is left in place.
pub fn run(config: &RunConfig) -> Result<TupleTable, CliError> {
    let path = config.out.join("scores").join("tuples.csv");
    let result = score_dir(config, &path);
    if result.is_err() && path.exists() {
        let _ = fs::remove_file(&path);
    }
    result
}

fn score_dir(config: &RunConfig, path: &Path) -> Result<TupleTable, CliError> {
    let dir = RunConfig::require(&config.features_dir, "features-dir")?;
    let kinds = scorer_kinds(&config.scorers)?;
    let files = feature_files(dir)?;
    let metrics: HashMap<(String, String), f64> = match &config.metrics {
        Some(path) => load_metrics(path)?,
        None => HashMap::new(),
    };

    let scored: Vec<Vec<TransferTuple>> = files
        .par_iter()
        .map(|f| -> Result<Vec<TransferTuple>, CliError> {
            let fs = load_features(&f.path)?;
            let records = score_all(&fs, &kinds).map_err(|e| {
                CliError::input(format!("{}__{}: {e}", f.dataset, f.architecture))
            })?;
            let metric = metrics.get(&(f.dataset.clone(), f.architecture.clone())).copied();
            Ok(records
                .into_iter()
                .map(|r| TransferTuple {
                    architecture: f.architecture.clone(),
                    dataset: f.dataset.clone(),
                    scorer: r.scorer.id().to_string(),
                    score: r.value,
                    metric,
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    let table = TupleTable::new(scored.into_iter().flatten().collect())?;

    let mut bytes = Vec::new();
    write_tuples(&table, &mut bytes)?;
    write_atomic(path, &bytes)?;
    println!(
        "scored {} feature files with {} scorer(s): {}",
        files.len(),
        kinds.len(),
        path.display()
    );
    Ok(table)
}
