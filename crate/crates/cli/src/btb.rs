//! `btb`: calibrate the hierarchical model and predict candidates.

use std::path::Path;

use serde_json::json;
use transfer_bench::btb::{calibrate, calibrate_loo, Calibration, DiagnosticsReport, Prediction, SamplerConfig};
use transfer_bench::data::{load_tuples, Group, GroupedSeries, TupleTable};
use transfer_bench::rank::{aggregated_weighted_tau, weighted_tau};

use crate::error::CliError;
use crate::options::{Format, RunConfig};
use crate::output::{csv_bytes, dir_name, full, json_bytes, num, pct, table, write_atomic};

pub const PREDICTION_HEADER: [&str; 6] = [
    "dataset",
    "architecture",
    "pred_mean",
    "pred_q025",
    "pred_q50",
    "pred_q975",
];

/// R-hat above which the run exits with status 3.
pub const RHAT_FAILURE: f64 = 1.05;

/// Predictions for one target dataset and the diagnostics of the fit that
/// produced them.
#[derive(Debug, Clone)]
pub struct TargetResult {
    pub dataset: String,
    pub predictions: Vec<Prediction>,
    pub truth: Option<Vec<f64>>,
    pub max_r_hat: f64,
    pub min_ess: f64,
    pub divergences: usize,
    pub n_flagged: usize,
    pub parameters: Vec<(String, f64, f64, bool)>,
}

impl TargetResult {
    fn new(dataset: String, predictions: Vec<Prediction>, truth: Option<Vec<f64>>, d: &DiagnosticsReport) -> Self {
        Self {
            dataset,
            predictions,
            truth,
            max_r_hat: d.max_r_hat,
            min_ess: d.min_ess,
            divergences: d.divergences,
            n_flagged: d.n_flagged(),
            parameters: d
                .parameters
                .iter()
                .map(|p| (p.name.clone(), p.r_hat, p.ess_bulk, p.flagged))
                .collect(),
        }
    }

    fn means(&self) -> Vec<f64> {
        self.predictions.iter().map(|p| p.mean).collect()
    }

    /// Weighted tau of predicted means against the truth, when defined.
    pub fn tau_w(&self) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        weighted_tau(&self.means(), truth).ok().map(|t| t.value)
    }

    /// NaN counts as a failure, as does any R-hat above the threshold.
    pub fn diagnostics_failed(&self) -> bool {
        !(self.max_r_hat <= RHAT_FAILURE)
    }
}

pub fn sampler(config: &RunConfig) -> SamplerConfig {
    SamplerConfig {
        chains: config.chains,
        warmup: config.warmup,
        keep: config.keep,
        seed: config.seed,
        ..SamplerConfig::default()
    }
}

/// Splits one calibration's predictions by dataset, in order of appearance.
fn split(cal: &Calibration) -> Vec<TargetResult> {
    let mut out: Vec<TargetResult> = Vec::new();
    for (i, p) in cal.predictions.iter().enumerate() {
        let pos = match out.iter().position(|r| r.dataset == p.dataset) {
            Some(pos) => pos,
            None => {
                out.push(TargetResult::new(
                    p.dataset.clone(),
                    Vec::new(),
                    cal.truth.as_ref().map(|_| Vec::new()),
                    &cal.draws.diagnostics,
                ));
                out.len() - 1
            }
        };
        out[pos].predictions.push(p.clone());
        if let (Some(t), Some(all)) = (out[pos].truth.as_mut(), cal.truth.as_ref()) {
            t.push(all[i]);
        }
    }
    out
}

fn save_draws(cal: &Calibration, dir: &Path) -> Result<(), CliError> {
    let mut bytes = Vec::new();
    transfer_bench::btb::write_draws(&cal.draws, &mut bytes)?;
    write_atomic(&dir.join("draws.csv"), &bytes)
}

pub fn predictions_csv(r: &TargetResult) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &PREDICTION_HEADER,
        r.predictions.iter().map(|p| {
            vec![
                p.dataset.clone(),
                p.candidate.clone(),
                full(p.mean),
                full(p.q025),
                full(p.q50),
                full(p.q975),
            ]
        }),
    )
}

pub fn diagnostics_csv(r: &TargetResult) -> Result<Vec<u8>, CliError> {
    let mut rows = vec![
        vec!["max_r_hat".to_string(), full(r.max_r_hat)],
        vec!["min_ess".to_string(), full(r.min_ess)],
        vec!["divergences".to_string(), r.divergences.to_string()],
        vec!["n_flagged".to_string(), r.n_flagged.to_string()],
    ];
    if let Some(t) = r.tau_w() {
        rows.push(vec!["tau_w_vs_truth".to_string(), full(t)]);
    }
    csv_bytes(&["key", "value"], rows)
}

pub fn parameters_csv(r: &TargetResult) -> Result<Vec<u8>, CliError> {
    csv_bytes(
        &["parameter", "r_hat", "ess_bulk", "flagged"],
        r.parameters
            .iter()
            .map(|(n, rh, ess, f)| vec![n.clone(), full(*rh), full(*ess), f.to_string()]),
    )
}

pub fn result_json(r: &TargetResult) -> Vec<u8> {
    let predictions: Vec<_> = r
        .predictions
        .iter()
        .map(|p| {
            json!({
                "dataset": p.dataset,
                "architecture": p.candidate,
                "pred_mean": num(p.mean),
                "pred_q025": num(p.q025),
                "pred_q50": num(p.q50),
                "pred_q975": num(p.q975),
            })
        })
        .collect();
    let parameters: Vec<_> = r
        .parameters
        .iter()
        .map(|(n, rh, ess, f)| json!({ "parameter": n, "r_hat": num(*rh), "ess_bulk": num(*ess), "flagged": f }))
        .collect();
    json_bytes(&json!({
        "dataset": r.dataset,
        "predictions": predictions,
        "diagnostics": {
            "max_r_hat": num(r.max_r_hat),
            "min_ess": num(r.min_ess),
            "divergences": r.divergences,
            "n_flagged": r.n_flagged,
            "parameters": parameters,
        },
        "tau_w_vs_truth": r.tau_w().map_or(serde_json::Value::Null, num),
    }))
}

fn write_result(r: &TargetResult, dir: &Path, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            write_atomic(&dir.join("predictions.csv"), &predictions_csv(r)?)?;
            write_atomic(&dir.join("diagnostics.csv"), &diagnostics_csv(r)?)?;
            write_atomic(&dir.join("parameters.csv"), &parameters_csv(r)?)
        }
        Format::Json => write_atomic(&dir.join("predictions.json"), &result_json(r)),
    }
}

/// Either every requested held-out dataset in turn, or one calibration on
/// the whole table predicting `--predict`.
pub fn fit(config: &RunConfig, table: &TupleTable) -> Result<Vec<(TargetResult, Calibration)>, CliError> {
    let sampler = sampler(config);
    if let Some(path) = &config.predict {
        if !config.hold_out.is_empty() {
            return Err(CliError::input("--predict and --hold-out are mutually exclusive"));
        }
        let prediction = load_tuples(path)?;
        let cal = calibrate(table, &prediction, &config.scorers, &sampler)?;
        return Ok(split(&cal).into_iter().map(|r| (r, cal.clone())).collect());
    }
    let targets = if config.hold_out.is_empty() {
        table.datasets().to_vec()
    } else {
        config.hold_out.clone()
    };
    if let Some(missing) = targets.iter().find(|d| !table.datasets().contains(d)) {
        return Err(CliError::input(format!("held-out dataset `{missing}` not in the tuples")));
    }
    if table.tuples().iter().any(|t| t.metric.is_none()) {
        return Err(CliError::input("calibration tuples must all have metrics"));
    }
    let mut out = Vec::new();
    for held_out in &targets {
        let cal = calibrate_loo(table, &config.scorers, held_out, &sampler)?;
        for r in split(&cal) {
            out.push((r, cal.clone()));
        }
    }
    Ok(out)
}

pub fn run(config: &RunConfig) -> Result<Vec<TargetResult>, CliError> {
    let path = RunConfig::require(&config.tuples, "tuples")?;
    let tuples = load_tuples(path)?;
    let fitted = fit(config, &tuples)?;

    let root = config.out.join("btb");
    let mut summary = Vec::new();
    let mut groups = Vec::new();
    let mut results = Vec::new();
    for (r, cal) in fitted {
        let dir = root.join(dir_name(&r.dataset));
        write_result(&r, &dir, config.format)?;
        if config.save_draws {
            save_draws(&cal, &dir)?;
        }
        let tau = r.tau_w();
        summary.push(vec![
            r.dataset.clone(),
            full(r.max_r_hat),
            full(r.min_ess),
            r.divergences.to_string(),
            tau.map(full).unwrap_or_default(),
        ]);
        if let Some(truth) = &r.truth {
            groups.push(Group::new(r.dataset.clone(), r.means(), truth.clone()));
        }
        results.push(r);
    }
    write_atomic(
        &root.join("summary.csv"),
        &csv_bytes(&["dataset", "max_r_hat", "min_ess", "divergences", "tau_w_vs_truth"], summary)?,
    )?;

    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.predictions.len().to_string(),
                format!("{:.4}", r.max_r_hat),
                format!("{:.0}", r.min_ess),
                r.divergences.to_string(),
                r.tau_w().map(pct).unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    print!(
        "{}",
        table(&["dataset", "candidates", "max R-hat", "min ESS", "divergences", "tau_w"], &rows)
    );
    if groups.len() == results.len() && !groups.is_empty() {
        if let Ok(t) = aggregated_weighted_tau(&GroupedSeries::new(groups)) {
            println!("combined aggregated tau_w: {}", pct(t.value));
        }
    }

    let failed: Vec<&str> = results
        .iter()
        .filter(|r| r.diagnostics_failed())
        .map(|r| r.dataset.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Diagnostics(format!(
            "R-hat above {RHAT_FAILURE} for {}; outputs written to {}",
            failed.join(", "),
            root.display()
        )));
    }
    Ok(results)
}
