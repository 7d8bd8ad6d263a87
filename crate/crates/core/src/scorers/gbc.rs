use super::{require_classes, ScoreRecord, ScorerError, ScorerKind};
use crate::data::FeatureSet;

/// Lower bound applied to per-dimension class variances.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Bhattacharyya distance between two diagonal Gaussians.
pub fn bhattacharyya_diagonal(mean_a: &[f64], var_a: &[f64], mean_b: &[f64], var_b: &[f64]) -> f64 {
    let mut db = 0.0;
    for d in 0..mean_a.len() {
        let avg = 0.5 * (var_a[d] + var_b[d]);
        db += (mean_a[d] - mean_b[d]).powi(2) / (8.0 * avg);
        db += 0.5 * (avg / (var_a[d] * var_b[d]).sqrt()).ln();
    }
    db
}

/// Negative sum over class pairs of the Gaussian Bhattacharyya coefficient
/// `exp(-D_B)`, with one diagonal Gaussian fitted per class.
pub fn gbc(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    require_classes(fs)?;
    let counts = fs.class_counts();
    if let Some((class, &count)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(ScorerError::ClassTooSmall { class, count });
    }
    let x = fs.features();
    let (k, d) = (fs.n_classes(), fs.n_features());
    let mut means = vec![vec![0.0; d]; k];
    for (i, &l) in fs.labels().iter().enumerate() {
        for j in 0..d {
            means[l][j] += x[(i, j)] / counts[l] as f64;
        }
    }
    let mut vars = vec![vec![0.0; d]; k];
    for (i, &l) in fs.labels().iter().enumerate() {
        for j in 0..d {
            vars[l][j] += (x[(i, j)] - means[l][j]).powi(2) / counts[l] as f64;
        }
    }
    for v in vars.iter_mut().flatten() {
        *v = v.max(VARIANCE_FLOOR);
    }
    let mut total = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            total += (-bhattacharyya_diagonal(&means[a], &vars[a], &means[b], &vars[b])).exp();
        }
    }
    ScoreRecord::new(ScorerKind::Gbc, -total)
}
