//! `report`: plot-ready data from earlier bench and btb outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use transfer_bench::data::TUPLE_HEADER;

use crate::bench::DRAWS_HEADER;
use crate::btb::PREDICTION_HEADER;
use crate::error::CliError;
use crate::options::RunConfig;
use crate::output::{csv_bytes, dir_name, write_atomic};

pub const SCATTER_HEADER: [&str; 4] = ["dataset", "architecture", "score", "metric"];

fn wanted(config: &RunConfig, scorer: &str) -> bool {
    config.scorers.is_empty() || config.scorers.iter().any(|s| s == scorer)
}

fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
    let bad = |m: String| CliError::input(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let found: Vec<String> = rdr.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    if found != header {
        return Err(bad(format!("expected header `{}`", header.join(","))));
    }
    rdr.records()
        .map(|r| {
            r.map(|r| r.iter().map(String::from).collect())
                .map_err(|e| bad(e.to_string()))
        })
        .collect()
}

/// Scatter of normalized score against normalized metric, one file per scorer.
fn scatter(config: &RunConfig, bench: &Path, report: &Path) -> Result<Vec<PathBuf>, CliError> {
    // Normalized metrics leave [0, 1], so the file is read as plain CSV.
    let rows = read_csv(&bench.join("normalized.csv"), &TUPLE_HEADER)?;
    let mut scorers: Vec<&str> = Vec::new();
    for r in &rows {
        if !scorers.contains(&r[2].as_str()) && wanted(config, &r[2]) {
            scorers.push(&r[2]);
        }
    }
    let mut written = Vec::new();
    for scorer in scorers {
        let own = rows
            .iter()
            .filter(|r| r[2] == scorer)
            .map(|r| vec![r[0].clone(), r[1].clone(), r[3].clone(), r[4].clone()]);
        let path = report.join(format!("scatter_{}.csv", dir_name(scorer)));
        write_atomic(&path, &csv_bytes(&SCATTER_HEADER, own)?)?;
        written.push(path);
    }
    Ok(written)
}

/// Bootstrap draws, one file per scorer with columns `scope,statistic,draw,value`.
fn draws(config: &RunConfig, bench: &Path, report: &Path) -> Result<Vec<PathBuf>, CliError> {
    let rows = read_csv(&bench.join("draws.csv"), &DRAWS_HEADER)?;
    let mut scorers: Vec<&str> = Vec::new();
    for r in &rows {
        if !scorers.contains(&r[0].as_str()) && wanted(config, &r[0]) {
            scorers.push(&r[0]);
        }
    }
    let mut written = Vec::new();
    for scorer in scorers {
        let own = rows.iter().filter(|r| r[0] == scorer).map(|r| r[1..].to_vec());
        let path = report.join(format!("draws_{}.csv", dir_name(scorer)));
        write_atomic(&path, &csv_bytes(&DRAWS_HEADER[1..], own)?)?;
        written.push(path);
    }
    Ok(written)
}

fn json_predictions(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let bad = |m: String| CliError::input(format!("{}: {m}", path.display()));
    let text = fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let preds = value["predictions"]
        .as_array()
        .ok_or_else(|| bad("missing `predictions` array".into()))?;
    Ok(preds
        .iter()
        .map(|p| {
            PREDICTION_HEADER
                .iter()
                .map(|k| match &p[*k] {
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    _ => String::new(),
                })
                .collect()
        })
        .collect())
}

/// All btb predictions in one file, target directories in name order.
fn predictions(btb: &Path, report: &Path) -> Result<Option<PathBuf>, CliError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(btb)
        .map_err(|e| CliError::input(format!("{}: {e}", btb.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut rows = Vec::new();
    for dir in &dirs {
        let csv_path = dir.join("predictions.csv");
        let json_path = dir.join("predictions.json");
        if csv_path.exists() {
            rows.extend(read_csv(&csv_path, &PREDICTION_HEADER)?);
        } else if json_path.exists() {
            rows.extend(json_predictions(&json_path)?);
        }
    }
    if rows.is_empty() {
        return Ok(None);
    }
    let path = report.join("btb_predictions.csv");
    write_atomic(&path, &csv_bytes(&PREDICTION_HEADER, rows)?)?;
    Ok(Some(path))
}

pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let bench = config.out.join("bench");
    let btb = config.out.join("btb");
    let report = config.out.join("report");
    let have_bench = bench.join("draws.csv").exists() && bench.join("normalized.csv").exists();
    if !have_bench && !btb.is_dir() {
        return Err(CliError::input(format!(
            "no bench or btb outputs under {}",
            config.out.display()
        )));
    }
    let mut written = Vec::new();
    if have_bench {
        written.extend(scatter(config, &bench, &report)?);
        written.extend(draws(config, &bench, &report)?);
    }
    if btb.is_dir() {
        written.extend(predictions(&btb, &report)?);
    }
    if written.is_empty() {
        return Err(CliError::input("upstream outputs contain nothing to report"));
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(written)
}
