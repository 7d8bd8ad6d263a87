//! Rank-normalized split R-hat and bulk effective sample size.

use statrs::distribution::{ContinuousCDF, Normal};

use super::model::{ModelSpec, ParameterVector};
use super::BtbError;
use crate::rank::average_ranks;

pub const RHAT_THRESHOLD: f64 = 1.01;
pub const ESS_THRESHOLD: f64 = 400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDiagnostic {
    pub name: String,
    pub r_hat: f64,
    pub ess_bulk: f64,
    /// R-hat above [`RHAT_THRESHOLD`], ESS below [`ESS_THRESHOLD`], or either
    /// undefined.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub parameters: Vec<ParameterDiagnostic>,
    /// NaN when any R-hat is undefined.
    pub max_r_hat: f64,
    /// NaN when any ESS is undefined.
    pub min_ess: f64,
    pub divergences: usize,
}

impl DiagnosticsReport {
    pub fn flagged(&self) -> impl Iterator<Item = &ParameterDiagnostic> {
        self.parameters.iter().filter(|p| p.flagged)
    }

    pub fn n_flagged(&self) -> usize {
        self.flagged().count()
    }
}

/// Splits each chain in half (dropping the middle draw of odd chains).
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(&c[..half]);
        out.push(&c[c.len() - half..]);
    }
    out
}

/// Normal scores of the pooled fractional ranks, `(r - 3/8) / (S + 1/4)`.
fn rank_normalize(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let ranks = average_ranks(&pooled);
    let s = pooled.len() as f64;
    let normal = Normal::standard();
    let mut out = Vec::with_capacity(chains.len());
    let mut k = 0;
    for c in chains {
        out.push(
            (0..c.len())
                .map(|i| normal.inverse_cdf((ranks[k + i] - 0.375) / (s + 0.25)))
                .collect(),
        );
        k += c.len();
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Classic R-hat of equal-length chains.
fn rhat_raw(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let m = chains.len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Biased autocovariance of one chain at lags `0..n`.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mu = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - mu).collect();
    (0..n)
        .map(|lag| (0..n - lag).map(|i| c[i] * c[i + lag]).sum::<f64>() / n as f64)
        .collect()
}

/// Multi-chain ESS with Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let nf = n as f64;
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_var = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        let grand = mean(&means);
        var_plus += means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    }
    let rho = |t: usize| -> f64 {
        let acov_t = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (mean_var - acov_t) / var_plus
    };

    let mut rho_hat = vec![0.0; n + 2];
    rho_hat[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    rho_hat[1] = rho_odd;
    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho(t + 1);
        rho_odd = rho(t + 2);
        if rho_even + rho_odd >= 0.0 {
            rho_hat[t + 1] = rho_even;
            rho_hat[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho_hat[max_t + 1] = rho_even;
    }
    // Enforce a monotone sequence of pair sums.
    let mut t = 1;
    while t + 3 <= max_t {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            let avg = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 1] = avg;
            rho_hat[t + 2] = avg;
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + rho_hat[max_t + 1];
    let tau = tau.max(1.0 / total.log10());
    total / tau
}

fn check_shape(chains: &[Vec<f64>]) -> Result<(), BtbError> {
    if chains.len() < 2 {
        return Err(BtbError::InsufficientDraws(format!("{} chain(s), need 2", chains.len())));
    }
    let n = chains[0].len();
    if n < 4 {
        return Err(BtbError::InsufficientDraws(format!("{n} draws per chain, need 4")));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(BtbError::InsufficientDraws("chains differ in length".into()));
    }
    Ok(())
}

/// Rank-normalized split R-hat. NaN when the draws have no variance.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, BtbError> {
    check_shape(chains)?;
    if is_constant(chains) {
        return Ok(f64::NAN);
    }
    Ok(rhat_raw(&rank_normalize(&split(chains))))
}

/// Bulk ESS: ESS of the rank-normalized split chains. NaN when the draws
/// have no variance.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64, BtbError> {
    check_shape(chains)?;
    if is_constant(chains) {
        return Ok(f64::NAN);
    }
    Ok(ess_raw(&rank_normalize(&split(chains))))
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().all(|&v| v == first)
}

/// Diagnoses parameter-major value chains: `values[k][c]` is chain `c` of
/// parameter `k`.
pub fn diagnose_values(
    names: &[String],
    values: &[Vec<Vec<f64>>],
    divergences: usize,
) -> Result<DiagnosticsReport, BtbError> {
    let mut parameters = Vec::with_capacity(names.len());
    for (name, chains) in names.iter().zip(values) {
        let r_hat = split_rhat(chains)?;
        let ess = ess_bulk(chains)?;
        let flagged = !(r_hat <= RHAT_THRESHOLD) || !(ess >= ESS_THRESHOLD);
        parameters.push(ParameterDiagnostic {
            name: name.clone(),
            r_hat,
            ess_bulk: ess,
            flagged,
        });
    }
    let max_r_hat = parameters
        .iter()
        .map(|p| p.r_hat)
        .fold(f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) });
    let min_ess = parameters
        .iter()
        .map(|p| p.ess_bulk)
        .fold(f64::INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.min(b) });
    Ok(DiagnosticsReport {
        parameters,
        max_r_hat,
        min_ess,
        divergences,
    })
}

/// Diagnostics of constrained parameters over exactly the given draws.
pub fn diagnose_chains(
    spec: &ModelSpec,
    chains: &[Vec<ParameterVector>],
    divergences: usize,
) -> Result<DiagnosticsReport, BtbError> {
    let names = spec.parameter_names();
    let flat: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| c.iter().map(ParameterVector::flatten).collect())
        .collect();
    let values: Vec<Vec<Vec<f64>>> = (0..names.len())
        .map(|k| flat.iter().map(|c| c.iter().map(|d| d[k]).collect()).collect())
        .collect();
    diagnose_values(&names, &values, divergences)
}

/// Recomputes diagnostics from stored draws.
pub fn diagnose(draws: &super::PosteriorDraws) -> Result<DiagnosticsReport, BtbError> {
    diagnose_chains(&draws.spec, &draws.chains, draws.divergences())
}
