//! Log maximum evidence of a Bayesian linear regression from features to
//! each one-hot target column.
//!
//! For target `y` the model is `y ~ N(F w, 1/beta)`, `w ~ N(0, 1/alpha)`.
//! With `sigma_i` the nonzero eigenvalues of `F^T F` and `x_i` the
//! projections of `y` on the matching left singular vectors, `(alpha, beta)`
//! are refined by the MacKay fixed point and the evidence is evaluated in
//! closed form.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{require_classes, ScoreRecord, ScorerError, ScorerKind};
use crate::data::FeatureSet;

/// Relative tolerance on `alpha` and `beta` between iterations.
pub const LOGME_TOL: f64 = 1e-5;
pub const LOGME_MAX_ITER: usize = 100;

const EIG_RCOND: f64 = 1e-10;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Converged evidence for one target column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceFit {
    pub alpha: f64,
    pub beta: f64,
    /// Total log evidence (not divided by N).
    pub log_evidence: f64,
    pub iterations: usize,
}

/// Spectral summary of one target: eigenvalues, squared projections and the
/// squared norm of the target outside the feature span.
struct Spectrum<'a> {
    sigma: &'a [f64],
    proj2: &'a [f64],
    outside: f64,
    n: usize,
    d: usize,
}

impl Spectrum<'_> {
    fn terms(&self, alpha: f64, beta: f64) -> (f64, f64, f64) {
        let t = alpha / beta;
        let mut gamma = 0.0;
        let mut m2 = 0.0;
        let mut res2 = self.outside;
        for (&s, &x2) in self.sigma.iter().zip(self.proj2) {
            gamma += s / (s + t);
            m2 += s * x2 / ((s + t) * (s + t));
            let shrink = t / (s + t);
            res2 += x2 * shrink * shrink;
        }
        (gamma, m2, res2)
    }

    fn log_evidence(&self, alpha: f64, beta: f64) -> f64 {
        let (_, m2, res2) = self.terms(alpha, beta);
        let (n, d, k) = (self.n as f64, self.d as f64, self.sigma.len() as f64);
        let log_det: f64 =
            self.sigma.iter().map(|s| (alpha + beta * s).ln()).sum::<f64>() + (d - k) * alpha.ln();
        0.5 * d * alpha.ln() + 0.5 * n * beta.ln() - 0.5 * n * LN_2PI - 0.5 * beta * res2 - 0.5 * alpha * m2
            - 0.5 * log_det
    }

    fn fit(&self) -> EvidenceFit {
        let (mut alpha, mut beta) = (1.0f64, 1.0f64);
        let floor = f64::MIN_POSITIVE.sqrt();
        let mut iterations = 0;
        for it in 1..=LOGME_MAX_ITER {
            iterations = it;
            let (gamma, m2, res2) = self.terms(alpha, beta);
            let next_alpha = if m2 > floor { gamma / m2 } else { alpha };
            let next_beta = (self.n as f64 - gamma) / res2.max(floor);
            let done = ((next_alpha - alpha) / alpha).abs() < LOGME_TOL
                && ((next_beta - beta) / beta).abs() < LOGME_TOL;
            alpha = next_alpha;
            beta = next_beta;
            if done {
                break;
            }
        }
        EvidenceFit {
            alpha,
            beta,
            log_evidence: self.log_evidence(alpha, beta),
            iterations,
        }
    }
}

/// Eigenvalues of `F^T F` above the cutoff and the projections of each
/// target column onto the corresponding left singular vectors.
fn decompose(f: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), ScorerError> {
    let (n, d) = f.shape();
    if n >= d {
        let eig = SymmetricEigen::try_new(f.tr_mul(f), f64::EPSILON, 0)
            .ok_or_else(|| ScorerError::Numerical("eigendecomposition did not converge".into()))?;
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
        let keep: Vec<usize> = (0..d)
            .filter(|&i| max > 0.0 && eig.eigenvalues[i] > EIG_RCOND * max)
            .collect();
        let ft_y = f.tr_mul(targets);
        let mut proj = DMatrix::zeros(keep.len(), targets.ncols());
        for (r, &i) in keep.iter().enumerate() {
            let s = eig.eigenvalues[i].sqrt();
            let v = eig.eigenvectors.column(i);
            for c in 0..targets.ncols() {
                proj[(r, c)] = v.dot(&ft_y.column(c)) / s;
            }
        }
        Ok((keep.iter().map(|&i| eig.eigenvalues[i]).collect(), proj))
    } else {
        let eig = SymmetricEigen::try_new(f * f.transpose(), f64::EPSILON, 0)
            .ok_or_else(|| ScorerError::Numerical("eigendecomposition did not converge".into()))?;
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(*v));
        let keep: Vec<usize> = (0..n)
            .filter(|&i| max > 0.0 && eig.eigenvalues[i] > EIG_RCOND * max)
            .collect();
        let mut proj = DMatrix::zeros(keep.len(), targets.ncols());
        for (r, &i) in keep.iter().enumerate() {
            let u = eig.eigenvectors.column(i);
            for c in 0..targets.ncols() {
                proj[(r, c)] = u.dot(&targets.column(c));
            }
        }
        Ok((keep.iter().map(|&i| eig.eigenvalues[i]).collect(), proj))
    }
}

/// Maximizes the evidence of every column of `targets` given features `f`.
pub fn fit_evidence(f: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Vec<EvidenceFit>, ScorerError> {
    if f.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
        return Err(ScorerError::Numerical("non-finite input".into()));
    }
    let (n, d) = f.shape();
    let (sigma, proj) = decompose(f, targets)?;
    let fits = (0..targets.ncols())
        .map(|c| {
            let proj2: Vec<f64> = proj.column(c).iter().map(|x| x * x).collect();
            let total = targets.column(c).norm_squared();
            let outside = (total - proj2.iter().sum::<f64>()).max(0.0);
            Spectrum {
                sigma: &sigma,
                proj2: &proj2,
                outside,
                n,
                d,
            }
            .fit()
        })
        .collect();
    Ok(fits)
}

/// Mean over classes of the per-sample log maximum evidence.
pub fn logme(fs: &FeatureSet) -> Result<ScoreRecord, ScorerError> {
    require_classes(fs)?;
    let n = fs.n_samples();
    let k = fs.n_classes();
    let mut onehot = DMatrix::zeros(n, k);
    for (i, &l) in fs.labels().iter().enumerate() {
        onehot[(i, l)] = 1.0;
    }
    let fits = fit_evidence(fs.features(), &onehot)?;
    let mean = fits.iter().map(|f| f.log_evidence / n as f64).sum::<f64>() / k as f64;
    ScoreRecord::new(ScorerKind::LogMe, mean)
}
