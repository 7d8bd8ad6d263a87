use nalgebra::DMatrix;

use super::{require_classes, ScoreRecord, ScorerError, ScorerKind};
use crate::data::FeatureSet;
use crate::rank::spearman_rho;

/// Rows centered and scaled to unit norm, so that `Z Z^T` is the row
/// correlation matrix.
fn standardized_rows(m: &DMatrix<f64>) -> Result<DMatrix<f64>, usize> {
    let mut z = m.clone();
    for (i, mut row) in z.row_iter_mut().enumerate() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        let norm = row.norm();
        if !(norm > 0.0) {
            return Err(i);
        }
        row /= norm;
    }
    Ok(z)
}

fn upper_distances(z: &DMatrix<f64>) -> Vec<f64> {
    let n = z.nrows();
    let corr = z * z.transpose();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(1.0 - corr[(i, j)]);
        }
    }
    out
}

/// Spearman correlation between the upper triangles of the pairwise
/// `1 - pearson` dissimilarity matrices of feature rows and one-hot label rows.
pub fn parc(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    require_classes(fs)?;
    let n = fs.n_samples();
    if n < 3 {
        return Err(ScorerError::TooFewSamples { needed: 3, found: n });
    }
    let zf = standardized_rows(fs.features()).map_err(ScorerError::ZeroVarianceRow)?;
    let mut onehot = DMatrix::zeros(n, fs.n_classes());
    for (i, &l) in fs.labels().iter().enumerate() {
        onehot[(i, l)] = 1.0;
    }
    let zy = standardized_rows(&onehot).map_err(ScorerError::ZeroVarianceRow)?;
    let rho = spearman_rho(&upper_distances(&zf), &upper_distances(&zy))
        .map_err(|e| ScorerError::Numerical(e.to_string()))?;
    ScoreRecord::new(ScorerKind::Parc, rho)
}
