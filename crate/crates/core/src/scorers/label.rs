//! Scorers built from source-model class probabilities.

use nalgebra::DMatrix;

use super::{ScoreRecord, ScorerError, ScorerKind};
use crate::data::FeatureSet;

fn probs(fs: &FeatureSet) -> Result<&DMatrix<f64>, ScorerError> {
    let p = fs.source_probs().ok_or(ScorerError::MissingSourceProbs)?;
    if p.nrows() == 0 {
        return Err(ScorerError::EmptyFeatures);
    }
    Ok(p)
}

/// Negative conditional entropy `-H(Y | Z)` of target labels given the
/// hard source labels `Z = argmax` of each probability row (first maximum on
/// ties), natural log.
pub fn nce(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    let p = probs(fs)?;
    let (n, c) = p.shape();
    let k = fs.n_classes();
    let mut joint = vec![0.0f64; c * k];
    for (i, &y) in fs.labels().iter().enumerate() {
        let row = p.row(i);
        let z = (0..c).fold(0, |best, j| if row[j] > row[best] { j } else { best });
        joint[z * k + y] += 1.0 / n as f64;
    }
    let mut value = 0.0;
    for z in 0..c {
        let pz: f64 = joint[z * k..(z + 1) * k].iter().sum();
        for &pzy in &joint[z * k..(z + 1) * k] {
            if pzy > 0.0 {
                value += pzy * (pzy / pz).ln();
            }
        }
    }
    ScoreRecord::new(ScorerKind::Nce, value.min(0.0))
}

/// Log expected empirical prediction: average log-likelihood of the target
/// labels under the classifier `sum_c P(y | c) p(c | x)`, with the joint
/// `P(y, c)` estimated from the soft source probabilities. Source classes
/// with zero marginal are skipped.
pub fn leep(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    let p = probs(fs)?;
    let (n, c) = p.shape();
    let k = fs.n_classes();
    let mut joint = DMatrix::<f64>::zeros(k, c);
    for (i, &y) in fs.labels().iter().enumerate() {
        for j in 0..c {
            joint[(y, j)] += p[(i, j)] / n as f64;
        }
    }
    let marginal: Vec<f64> = (0..c).map(|j| joint.column(j).sum()).collect();
    let mut total = 0.0;
    for (i, &y) in fs.labels().iter().enumerate() {
        let mut eep = 0.0;
        for j in 0..c {
            if marginal[j] > 0.0 {
                eep += joint[(y, j)] / marginal[j] * p[(i, j)];
            }
        }
        total += eep.ln();
    }
    ScoreRecord::new(ScorerKind::Leep, (total / n as f64).min(0.0))
}
