//! Seeded bootstrap over grouped series.
//!
//! Iteration `b` draws from `ChaCha8Rng::seed_from_u64(seed)` with its
//! stream set to `b`, so every draw depends only on (data, seed, b). Indices
//! are drawn with `random_range(0..n)`, group by group in series order for
//! stratified resampling, and over the concatenation of all groups for pooled
//! resampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tau::{aggregated_weighted_tau, kendall_tau, pearson_r, weighted_tau};
use super::RankError;
use crate::data::{Group, GroupedSeries};

/// Statistic evaluated on each resample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Tau,
    WeightedTau,
    AggregatedWeightedTau,
    AveragedWeightedTau,
    Pearson,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [
        Statistic::Tau,
        Statistic::WeightedTau,
        Statistic::AggregatedWeightedTau,
        Statistic::AveragedWeightedTau,
        Statistic::Pearson,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Statistic::Tau => "tau",
            Statistic::WeightedTau => "weighted_tau",
            Statistic::AggregatedWeightedTau => "aggregated_weighted_tau",
            Statistic::AveragedWeightedTau => "averaged_weighted_tau",
            Statistic::Pearson => "pearson",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.id() == id)
    }

    /// Whether the statistic is defined on a single group only.
    pub fn is_single_group(&self) -> bool {
        matches!(
            self,
            Statistic::Tau | Statistic::WeightedTau | Statistic::Pearson
        )
    }

    /// Evaluates the statistic on a series. Single-group statistics require
    /// exactly one group.
    pub fn evaluate(&self, g: &GroupedSeries) -> Result<f64, RankError> {
        if self.is_single_group() {
            let group = match g.groups.as_slice() {
                [one] => one,
                [] => return Err(RankError::NoGroups),
                many => return Err(RankError::SingleGroupRequired(many.len())),
            };
            return match self {
                Statistic::Tau => kendall_tau(&group.x, &group.y).map(|t| t.value),
                Statistic::WeightedTau => weighted_tau(&group.x, &group.y).map(|t| t.value),
                _ => pearson_r(&group.x, &group.y),
            };
        }
        match self {
            Statistic::AggregatedWeightedTau => aggregated_weighted_tau(g).map(|t| t.value),
            _ => super::tau::averaged_weighted_tau(g),
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

/// How each resample is drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Resampling {
    /// Independently within each group, preserving group sizes.
    #[default]
    Stratified,
    /// Over all points at once; each drawn point stays in its origin group.
    /// Groups left with fewer than two points are dropped from the resample.
    Pooled,
}

impl Resampling {
    pub fn id(&self) -> &'static str {
        match self {
            Resampling::Stratified => "stratified",
            Resampling::Pooled => "pooled",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "stratified" => Some(Resampling::Stratified),
            "pooled" => Some(Resampling::Pooled),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub seed: u64,
    pub resampling: Resampling,
}

impl BootstrapConfig {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            resampling: Resampling::Stratified,
        }
    }
}

/// Point estimate, retained draws and their 95% percentile interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    pub point: f64,
    /// Retained draws in iteration order.
    pub draws: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of the draws (0 for a single draw).
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_degenerate: usize,
}

/// Per-iteration generator.
pub fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// Draws one resample of `g`.
pub fn resample<R: Rng>(g: &GroupedSeries, resampling: Resampling, rng: &mut R) -> GroupedSeries {
    match resampling {
        Resampling::Stratified => GroupedSeries::new(
            g.groups
                .iter()
                .map(|group| {
                    let n = group.len();
                    let mut out = Group::new(group.dataset.clone(), Vec::with_capacity(n), Vec::with_capacity(n));
                    for _ in 0..n {
                        let k = rng.random_range(0..n);
                        out.x.push(group.x[k]);
                        out.y.push(group.y[k]);
                    }
                    out
                })
                .collect(),
        ),
        Resampling::Pooled => {
            let origin: Vec<(usize, usize)> = g
                .groups
                .iter()
                .enumerate()
                .flat_map(|(gi, group)| (0..group.len()).map(move |k| (gi, k)))
                .collect();
            let mut groups: Vec<Group> = g
                .groups
                .iter()
                .map(|group| Group::new(group.dataset.clone(), Vec::new(), Vec::new()))
                .collect();
            for _ in 0..origin.len() {
                let (gi, k) = origin[rng.random_range(0..origin.len())];
                groups[gi].x.push(g.groups[gi].x[k]);
                groups[gi].y.push(g.groups[gi].y[k]);
            }
            groups.retain(|group| group.len() >= 2);
            GroupedSeries::new(groups)
        }
    }
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of sorted values.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Stratified bootstrap with `iterations` resamples.
pub fn bootstrap(
    g: &GroupedSeries,
    stat: Statistic,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapSummary, RankError> {
    bootstrap_with(g, stat, &BootstrapConfig::new(iterations, seed))
}

pub fn bootstrap_with(
    g: &GroupedSeries,
    stat: Statistic,
    config: &BootstrapConfig,
) -> Result<BootstrapSummary, RankError> {
    if config.iterations == 0 {
        return Err(RankError::Bootstrap("iterations must be at least 1".into()));
    }
    let point = stat.evaluate(g)?;
    let results: Vec<Option<f64>> = (0..config.iterations)
        .into_par_iter()
        .map(|b| {
            let mut rng = iteration_rng(config.seed, b);
            let sample = resample(g, config.resampling, &mut rng);
            stat.evaluate(&sample).ok().filter(|v| v.is_finite())
        })
        .collect();
    let draws: Vec<f64> = results.iter().flatten().copied().collect();
    let n_degenerate = results.len() - draws.len();
    if draws.is_empty() {
        return Err(RankError::Bootstrap(format!(
            "all {} resamples were degenerate",
            config.iterations
        )));
    }
    let m = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / m;
    let sd = if draws.len() > 1 {
        (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        point,
        mean,
        sd,
        ci_low: percentile_sorted(&sorted, 0.025),
        ci_high: percentile_sorted(&sorted, 0.975),
        draws,
        n_degenerate,
    })
}
