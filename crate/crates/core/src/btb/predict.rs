//! Posterior-predictive mixture for candidates on an unseen dataset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use super::hmc::PosteriorDraws;
use super::BtbError;
use crate::rank::percentile_sorted;

/// Normalized scores of one candidate, one entry per scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScores {
    pub dataset: String,
    pub candidate: String,
    pub scores: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub dataset: String,
    pub candidate: String,
    /// Draw-major: for every posterior draw, one sample per scorer in the
    /// candidate's score order.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

impl Prediction {
    fn from_samples(dataset: String, candidate: String, samples: Vec<f64>) -> Self {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        Self {
            dataset,
            candidate,
            mean,
            q025: percentile_sorted(&sorted, 0.025),
            q50: percentile_sorted(&sorted, 0.5),
            q975: percentile_sorted(&sorted, 0.975),
            samples,
        }
    }
}

/// Samples the predictive mixture for every candidate.
///
/// For each posterior draw and scorer `s` with score `t`, fresh dataset-level
/// parameters are drawn from the scorer-level distributions
/// (`alpha* ~ N(mu_alpha[s], sigma_alpha[s])`, `beta*` likewise,
/// `sigma* ~ Exp(sigma[s])`) and then `m ~ N(alpha* + beta* t, sigma*)`.
/// Candidate `j` uses `ChaCha8Rng::seed_from_u64(seed)` on stream `j`.
pub fn predict(
    draws: &PosteriorDraws,
    candidates: &[CandidateScores],
    seed: u64,
) -> Result<Vec<Prediction>, BtbError> {
    let spec = &draws.spec;
    let mut resolved = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.scores.is_empty() {
            return Err(BtbError::Data(format!("candidate `{}` has no scores", c.candidate)));
        }
        let mut idx = Vec::with_capacity(c.scores.len());
        for (scorer, t) in &c.scores {
            let s = spec
                .scorer_index(scorer)
                .ok_or_else(|| BtbError::UnknownScorer(scorer.clone()))?;
            if !t.is_finite() {
                return Err(BtbError::Data(format!(
                    "non-finite score for candidate `{}`, scorer `{scorer}`",
                    c.candidate
                )));
            }
            idx.push((s, *t));
        }
        resolved.push(idx);
    }
    let n_samples = draws.n_draws();
    Ok(candidates
        .par_iter()
        .zip(resolved.par_iter())
        .enumerate()
        .map(|(j, (cand, scores))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut samples = Vec::with_capacity(n_samples * scores.len());
            for p in draws.chains.iter().flatten() {
                for &(s, t) in scores {
                    let sp = &p.scorer[s];
                    let z_a: f64 = rng.sample(StandardNormal);
                    let z_b: f64 = rng.sample(StandardNormal);
                    let e: f64 = rng.sample(Exp1);
                    let z_m: f64 = rng.sample(StandardNormal);
                    let alpha = sp.mu_alpha + sp.sigma_alpha * z_a;
                    let beta = sp.mu_beta + sp.sigma_beta * z_b;
                    let sigma = sp.sigma * e;
                    samples.push(alpha + beta * t + sigma * z_m);
                }
            }
            Prediction::from_samples(cand.dataset.clone(), cand.candidate.clone(), samples)
        })
        .collect())
}
