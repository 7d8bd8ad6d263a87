use nalgebra::{DMatrix, SymmetricEigen};

use super::{require_classes, ScoreRecord, ScorerError, ScorerKind};
use crate::data::FeatureSet;

/// Relative cutoff below which eigenvalues are treated as zero in the
/// pseudo-inverse.
const PINV_RCOND: f64 = 1e-10;

/// Shrinkage applied to the feature covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shrinkage {
    /// Closed-form Ledoit-Wolf coefficient.
    LedoitWolf,
    /// Fixed coefficient in `[0, 1]`.
    Fixed(f64),
}

/// Returns the mean-centered features, the feature covariance and the
/// between-class covariance (class means weighted by class frequency). Both
/// covariances divide by N.
pub fn class_covariances(fs: &FeatureSet) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let x = fs.features();
    let (n, d) = x.shape();
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov_f = centered.tr_mul(&centered) / n as f64;

    let counts = fs.class_counts();
    let mut sums = DMatrix::<f64>::zeros(fs.n_classes(), d);
    for (i, &l) in fs.labels().iter().enumerate() {
        let mut row = sums.row_mut(l);
        row += centered.row(i);
    }
    let mut cov_b = DMatrix::<f64>::zeros(d, d);
    for (k, &count) in counts.iter().enumerate() {
        let mu = sums.row(k) / count as f64;
        cov_b += mu.tr_mul(&mu) * (count as f64 / n as f64);
    }
    (centered, cov_f, cov_b)
}

fn pinv_symmetric(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = PINV_RCOND * max;
    let inv = eig
        .eigenvalues
        .map(|v| if v.abs() > cutoff && v != 0.0 { 1.0 / v } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // tr(AB) = sum_ij A_ij B_ji
    a.iter().zip(b.transpose().iter()).map(|(x, y)| x * y).sum()
}

fn h_from(cov_f: &DMatrix<f64>, cov_b: &DMatrix<f64>) -> f64 {
    trace_of_product(&pinv_symmetric(cov_f), cov_b)
}

/// `tr(pinv(cov_f) * cov_b)`.
pub fn h_score(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    require_classes(fs)?;
    let (_, cov_f, cov_b) = class_covariances(fs);
    ScoreRecord::new(ScorerKind::HScore, h_from(&cov_f, &cov_b))
}

/// Ledoit-Wolf shrinkage coefficient toward `(tr(S)/D) I` for centered
/// observations (rows), clipped to `[0, 1]`.
pub fn ledoit_wolf_shrinkage(centered: &DMatrix<f64>) -> f64 {
    let (n, d) = centered.shape();
    let s = centered.tr_mul(centered) / n as f64;
    let mu = s.trace() / d as f64;
    // d2 = ||S - mu I||^2 / D
    let mut d2 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { mu } else { 0.0 };
            d2 += (s[(i, j)] - target).powi(2);
        }
    }
    d2 /= d as f64;
    if d2 == 0.0 {
        return 0.0;
    }
    // b2 = (1/N^2) sum_k ||x_k x_k^T - S||^2 / D
    let mut b2 = 0.0;
    for row in centered.row_iter() {
        for i in 0..d {
            for j in 0..d {
                b2 += (row[i] * row[j] - s[(i, j)]).powi(2);
            }
        }
    }
    b2 /= (n * n) as f64 * d as f64;
    (b2.min(d2) / d2).clamp(0.0, 1.0)
}

pub fn regularized_h_score(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    regularized_h_score_with(fs, Shrinkage::LedoitWolf)
}

/// H-Score with the feature covariance replaced by
/// `(1 - l) S + l (tr(S)/D) I`.
pub fn regularized_h_score_with(fs: &FeatureSet, shrinkage: Shrinkage) -> Result<ScoreRecord, ScorerError> {
    require_classes(fs)?;
    let (centered, cov_f, cov_b) = class_covariances(fs);
    let lambda = match shrinkage {
        Shrinkage::LedoitWolf => ledoit_wolf_shrinkage(&centered),
        Shrinkage::Fixed(l) if (0.0..=1.0).contains(&l) => l,
        Shrinkage::Fixed(l) => {
            return Err(ScorerError::Numerical(format!("shrinkage {l} outside [0, 1]")))
        }
    };
    let d = cov_f.nrows();
    let mu = cov_f.trace() / d as f64;
    let shrunk = &cov_f * (1.0 - lambda) + DMatrix::<f64>::identity(d, d) * (lambda * mu);
    ScoreRecord::new(ScorerKind::RegularizedHScore, h_from(&shrunk, &cov_b))
}
