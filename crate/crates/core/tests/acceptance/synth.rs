//! Synthetic data generators shared by the acceptance checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use transfer_bench::btb::{ModelData, ModelSpec};
use transfer_bench::data::{Group, GroupedSeries, TransferTuple, TupleTable};

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `groups` groups of `n` points with `x ~ U(0, 1)` and `y = x + N(0, noise)`.
pub fn noisy_groups<R: Rng>(rng: &mut R, groups: usize, n: usize, noise: f64) -> GroupedSeries {
    let eps = Normal::new(0.0, noise).unwrap();
    GroupedSeries::new(
        (0..groups)
            .map(|g| {
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let y: Vec<f64> = x.iter().map(|v| v + eps.sample(rng)).collect();
                Group::new(format!("d{g}"), x, y)
            })
            .collect(),
    )
}

/// Random vector of length `n`; with `ties` the values are small integers.
pub fn vector<R: Rng>(rng: &mut R, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| if ties { rng.random_range(0..4) as f64 } else { rng.random::<f64>() })
        .collect()
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in v.iter_mut() {
        *x = (*x - mean) / sd;
    }
}

/// Observations drawn from the hierarchical model with scorer-level slopes
/// `mu_beta`, `datasets` datasets and `n` candidates each. Scores are
/// standardized within each cell.
pub fn model_data(seed: u64, mu_beta: &[f64], datasets: usize, n: usize) -> ModelData {
    let mut rng = rng(seed, 0);
    let (sigma_alpha_s, sigma_beta_s, sigma_s) = (0.1, 0.1, 0.3);
    let noise_scale = Exp::new(1.0 / sigma_s).unwrap();
    let mut obs = Vec::new();
    for (s, &mb) in mu_beta.iter().enumerate() {
        let mu_alpha_s = 0.1 * rng.sample::<f64, _>(StandardNormal);
        for d in 0..datasets {
            let alpha = mu_alpha_s + sigma_alpha_s * rng.sample::<f64, _>(StandardNormal);
            let beta = mb + sigma_beta_s * rng.sample::<f64, _>(StandardNormal);
            let sigma = noise_scale.sample(&mut rng);
            let mut t: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            standardize(&mut t);
            for ti in t {
                let m = alpha + beta * ti + sigma * rng.sample::<f64, _>(StandardNormal);
                obs.push((s, d, ti, m));
            }
        }
    }
    let spec = ModelSpec::new(
        (0..mu_beta.len()).map(|s| format!("s{s}")).collect(),
        (0..datasets).map(|d| format!("d{d}")).collect(),
    )
    .unwrap();
    ModelData::from_observations(spec, &obs).unwrap()
}

pub const HETERO_SCORERS: [&str; 3] = ["alpha_scorer", "beta_scorer", "gamma_scorer"];

/// Raw tuples for `datasets` x `archs` candidates and three scorers whose
/// reliability varies by dataset: on dataset `d`, scorer `k` reports
/// `b[k,d] * z(metric) + noise` with `b[k,d] ~ N(mean_k, 0.3)`. The mean
/// slopes are close, so which scorer is best changes from dataset to dataset.
pub fn heterogeneous_table(seed: u64, datasets: usize, archs: usize) -> TupleTable {
    let mut rng = rng(seed, 1);
    let means = [0.7, 0.6, 0.5];
    let mut tuples = Vec::new();
    for d in 0..datasets {
        let metric: Vec<f64> = (0..archs).map(|_| 0.5 + 0.45 * rng.random::<f64>()).collect();
        let mut z = metric.clone();
        standardize(&mut z);
        for (k, name) in HETERO_SCORERS.iter().enumerate() {
            let b = means[k] + 0.3 * rng.sample::<f64, _>(StandardNormal);
            for a in 0..archs {
                let noise: f64 = rng.sample(StandardNormal);
                tuples.push(TransferTuple {
                    architecture: format!("arch{a:02}"),
                    dataset: format!("data{d:02}"),
                    scorer: name.to_string(),
                    score: b * z[a] + noise,
                    metric: Some(metric[a]),
                });
            }
        }
    }
    TupleTable::new(tuples).unwrap()
}
