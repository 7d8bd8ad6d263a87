//! `bench`: bootstrap rank correlations of every scorer against the metrics.

use serde_json::json;
use transfer_bench::data::{group_by_dataset, load_tuples, write_tuples, z_normalize, GroupedSeries, TupleTable};
use transfer_bench::rank::{bootstrap, BootstrapSummary, Statistic};

use crate::error::CliError;
use crate::options::{Format, RunConfig};
use crate::output::{csv_bytes, full, json_bytes, num, pct, table, write_atomic};

pub const BENCH_HEADER: [&str; 8] = [
    "scorer",
    "scope",
    "statistic",
    "point",
    "boot_mean",
    "ci_low",
    "ci_high",
    "n_degenerate",
];
pub const DRAWS_HEADER: [&str; 5] = ["scorer", "scope", "statistic", "draw", "value"];

/// Scope of the multi-group statistics.
pub const ALL_SCOPE: &str = "all";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scorer: String,
    pub scope: String,
    pub statistic: Statistic,
    pub summary: BootstrapSummary,
}

pub fn statistics(ids: &[String]) -> Result<Vec<Statistic>, CliError> {
    ids.iter()
        .map(|id| {
            Statistic::from_id(id).ok_or_else(|| {
                let known: Vec<&str> = Statistic::ALL.iter().map(|s| s.id()).collect();
                CliError::input(format!("unknown statistic `{id}` (known: {})", known.join(", ")))
            })
        })
        .collect()
}

/// Scorers of `table` restricted to `wanted` (all when empty), in request
/// order.
pub fn select_scorers(table: &TupleTable, wanted: &[String]) -> Result<Vec<String>, CliError> {
    if wanted.is_empty() {
        return Ok(table.scorers().to_vec());
    }
    for s in wanted {
        if !table.scorers().contains(s) {
            return Err(CliError::input(format!("scorer `{s}` not present in the tuples")));
        }
    }
    Ok(wanted.to_vec())
}

/// Every (scorer, scope, statistic) summary. Every bootstrap uses the same
/// seed, so a one-dataset aggregate reproduces that dataset's row.
pub fn compute(
    table: &TupleTable,
    scorers: &[String],
    stats: &[Statistic],
    iterations: usize,
    seed: u64,
) -> Result<Vec<BenchRow>, CliError> {
    let mut rows = Vec::new();
    for scorer in scorers {
        let series = group_by_dataset(table, scorer)?;
        for &stat in stats {
            let scoped: Vec<(String, GroupedSeries)> = if stat.is_single_group() {
                series
                    .groups
                    .iter()
                    .map(|g| (g.dataset.clone(), GroupedSeries::single(g.clone())))
                    .collect()
            } else {
                vec![(ALL_SCOPE.to_string(), series.clone())]
            };
            for (scope, g) in scoped {
                let summary = bootstrap(&g, stat, iterations, seed).map_err(|e| {
                    CliError::input(format!("{scorer}, {scope}, {stat}: {e}"))
                })?;
                rows.push(BenchRow {
                    scorer: scorer.clone(),
                    scope,
                    statistic: stat,
                    summary,
                });
            }
        }
    }
    Ok(rows)
}

pub fn report_csv(rows: &[BenchRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &BENCH_HEADER,
        rows.iter().map(|r| {
            vec![
                r.scorer.clone(),
                r.scope.clone(),
                r.statistic.id().to_string(),
                full(r.summary.point),
                full(r.summary.mean),
                full(r.summary.ci_low),
                full(r.summary.ci_high),
                r.summary.n_degenerate.to_string(),
            ]
        }),
    )
}

pub fn report_json(rows: &[BenchRow], iterations: usize, seed: u64) -> Vec<u8> {
    let rows: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "scorer": r.scorer,
                "scope": r.scope,
                "statistic": r.statistic.id(),
                "point": num(r.summary.point),
                "boot_mean": num(r.summary.mean),
                "ci_low": num(r.summary.ci_low),
                "ci_high": num(r.summary.ci_high),
                "n_degenerate": r.summary.n_degenerate,
            })
        })
        .collect();
    json_bytes(&json!({ "iterations": iterations, "seed": seed, "rows": rows }))
}

pub fn draws_csv(rows: &[BenchRow]) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &DRAWS_HEADER,
        rows.iter().flat_map(|r| {
            r.summary.draws.iter().enumerate().map(move |(i, v)| {
                vec![
                    r.scorer.clone(),
                    r.scope.clone(),
                    r.statistic.id().to_string(),
                    i.to_string(),
                    full(*v),
                ]
            })
        }),
    )
}

/// Human table, values x100 with two decimals.
pub fn human(rows: &[BenchRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.scorer.clone(),
                r.scope.clone(),
                r.statistic.id().to_string(),
                pct(r.summary.point),
                pct(r.summary.mean),
                format!("[{}, {}]", pct(r.summary.ci_low), pct(r.summary.ci_high)),
                r.summary.n_degenerate.to_string(),
            ]
        })
        .collect();
    table(
        &["scorer", "scope", "statistic", "point", "boot_mean", "95% CI", "degenerate"],
        &cells,
    )
}

pub fn run(config: &RunConfig) -> Result<Vec<BenchRow>, CliError> {
    let path = RunConfig::require(&config.tuples, "tuples")?;
    let stats = statistics(&config.stats)?;
    if stats.is_empty() {
        return Err(CliError::input("--stat selects no statistic"));
    }
    let table = load_tuples(path)?;
    let scorers = select_scorers(&table, &config.scorers)?;
    let table = table.filter(|t| scorers.contains(&t.scorer));
    if let Some(t) = table.tuples().iter().find(|t| t.metric.is_none()) {
        return Err(CliError::input(format!(
            "tuple ({}, {}, {}) has no metric",
            t.dataset, t.architecture, t.scorer
        )));
    }
    let rows = compute(&table, &scorers, &stats, config.iterations, config.seed)?;

    let dir = config.out.join("bench");
    match config.format {
        Format::Csv => write_atomic(&dir.join("bench.csv"), &report_csv(&rows)?)?,
        Format::Json => write_atomic(&dir.join("bench.json"), &report_json(&rows, config.iterations, config.seed))?,
    }
    write_atomic(&dir.join("draws.csv"), &draws_csv(&rows)?)?;
    let mut normalized = Vec::new();
    write_tuples(&z_normalize(&table)?, &mut normalized)?;
    write_atomic(&dir.join("normalized.csv"), &normalized)?;
    print!("{}", human(&rows));
    Ok(rows)
}
