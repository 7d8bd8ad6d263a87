//! Calibrate on some tuples, predict the candidates of others.

use super::hmc::{sample, PosteriorDraws, SamplerConfig};
use super::model::{ModelData, ModelSpec};
use super::predict::{predict, CandidateScores, Prediction};
use super::BtbError;
use crate::data::{z_normalize, TupleTable};

/// Draws and predictions of one calibration.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub draws: PosteriorDraws,
    pub predictions: Vec<Prediction>,
    /// Raw ground-truth metric per prediction, when every candidate has one.
    pub truth: Option<Vec<f64>>,
}

fn resolve_scorers(calibration: &TupleTable, scorers: &[String]) -> Result<Vec<String>, BtbError> {
    if scorers.is_empty() {
        return Ok(calibration.scorers().to_vec());
    }
    for s in scorers {
        if !calibration.scorers().contains(s) {
            return Err(BtbError::UnknownScorer(s.clone()));
        }
    }
    Ok(scorers.to_vec())
}

/// Groups a (raw) prediction table into candidates in order of first
/// appearance of (dataset, architecture); scores are z-normalized within
/// each (scorer, dataset) group.
fn candidates(prediction: &TupleTable) -> Result<(Vec<CandidateScores>, Option<Vec<f64>>), BtbError> {
    let normalized = z_normalize(&prediction.without_metrics())?;
    let mut out: Vec<CandidateScores> = Vec::new();
    let mut truth: Vec<Option<f64>> = Vec::new();
    for (t, raw) in normalized.tuples().iter().zip(prediction.tuples()) {
        let pos = out
            .iter()
            .position(|c| c.dataset == t.dataset && c.candidate == t.architecture);
        let pos = match pos {
            Some(p) => p,
            None => {
                out.push(CandidateScores {
                    dataset: t.dataset.clone(),
                    candidate: t.architecture.clone(),
                    scores: Vec::new(),
                });
                truth.push(raw.metric);
                out.len() - 1
            }
        };
        out[pos].scores.push((t.scorer.clone(), t.score));
    }
    let truth = truth.into_iter().collect::<Option<Vec<f64>>>();
    Ok((out, truth))
}

/// Fits the model on `calibration` (raw metrics required) restricted to
/// `scorers` (all of its scorers when empty), then predicts every candidate
/// in `prediction` (raw; metrics optional and only reported as truth).
pub fn calibrate(
    calibration: &TupleTable,
    prediction: &TupleTable,
    scorers: &[String],
    config: &SamplerConfig,
) -> Result<Calibration, BtbError> {
    let scorers = resolve_scorers(calibration, scorers)?;
    let cal = calibration.filter(|t| scorers.contains(&t.scorer));
    if cal.is_empty() {
        return Err(BtbError::Data("calibration split is empty".into()));
    }
    let cal = z_normalize(&cal)?;
    let spec = ModelSpec::new(scorers.clone(), cal.datasets().to_vec())?;
    let data = ModelData::with_spec(spec, &cal)?;

    if let Some(t) = prediction.tuples().iter().find(|t| data.spec().scorer_index(&t.scorer).is_none()) {
        return Err(BtbError::UnknownScorer(t.scorer.clone()));
    }
    if prediction.is_empty() {
        return Err(BtbError::Data("no candidates to predict".into()));
    }
    let (cands, truth) = candidates(prediction)?;
    let draws = sample(&data, config)?;
    let predictions = predict(&draws, &cands, config.seed)?;
    Ok(Calibration {
        draws,
        predictions,
        truth,
    })
}

/// Leave-one-dataset-out: calibrates on every dataset except `held_out`
/// and predicts the held-out candidates from their scores.
pub fn calibrate_loo(
    table: &TupleTable,
    scorers: &[String],
    held_out: &str,
    config: &SamplerConfig,
) -> Result<Calibration, BtbError> {
    if !table.datasets().iter().any(|d| d == held_out) {
        return Err(BtbError::MissingDataset(held_out.to_string()));
    }
    let in_set = |s: &str| scorers.is_empty() || scorers.iter().any(|x| x == s);
    let calibration = table.filter(|t| t.dataset != held_out);
    if calibration.is_empty() {
        return Err(BtbError::Data(format!(
            "no calibration datasets remain after holding out `{held_out}`"
        )));
    }
    let prediction = table.filter(|t| t.dataset == held_out && in_set(&t.scorer));
    calibrate(&calibration, &prediction, scorers, config)
}
