//! Hierarchical-model criteria.

use std::fmt::Write;
use std::time::Instant;

use rand::Rng;
use transfer_bench::btb::{calibrate_loo, sample, ModelData, ModelSpec, SamplerConfig};
use transfer_bench::data::{group_by_dataset, Group, GroupedSeries, TupleTable};
use transfer_bench::rank::aggregated_weighted_tau;

use crate::synth;
use crate::Check;

pub fn c6_gradient() -> Check {
    let data = synth::model_data(6, &[0.2, 0.6, 0.9], 4, 10);
    let mut rng = synth::rng(6, 1);
    let h = 1e-5;
    let mut max_rel = 0.0f64;
    let mut out = String::new();
    for _ in 0..20 {
        let u: Vec<f64> = (0..data.spec().dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (lp, grad) = data.log_posterior(&u).unwrap();
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (data.log_posterior(&up).unwrap().0 - data.log_posterior(&dn).unwrap().0) / (2.0 * h);
            let scale = fd.abs().max(grad[i].abs()).max(1e-6);
            max_rel = max_rel.max((fd - grad[i]).abs() / scale);
        }
        writeln!(out, "{lp:?}").unwrap();
    }
    Check::new(
        6,
        "log-posterior gradient",
        max_rel < 1e-4,
        format!("max relative error {max_rel:.2e} at 20 points"),
        out,
    )
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    s / n as f64
}

pub fn c7_prior_recovery() -> Check {
    let start = Instant::now();
    let spec = ModelSpec::new(
        (0..3).map(|s| format!("s{s}")).collect(),
        (0..4).map(|d| format!("d{d}")).collect(),
    )
    .unwrap();
    let draws = sample(&ModelData::empty(spec), &SamplerConfig::with_seed(7)).unwrap();
    let all = || draws.chains.iter().flatten();
    let mu_alpha = mean(all().map(|p| p.mu_alpha));
    let mu_beta = mean(all().map(|p| p.mu_beta));
    let sigma_alpha = mean(all().map(|p| p.sigma_alpha));
    let sigma_beta = mean(all().map(|p| p.sigma_beta));
    let sigma = mean(all().map(|p| p.sigma));
    let r_hat = draws.diagnostics.max_r_hat;
    let secs = start.elapsed().as_secs_f64();
    let pass = mu_alpha.abs() <= 0.05
        && mu_beta.abs() <= 0.05
        && (sigma_alpha - 1.0).abs() <= 0.1
        && (sigma_beta - 1.0).abs() <= 0.1
        && (sigma - 1.0).abs() <= 0.1
        && r_hat < 1.01
        && secs < 60.0;
    Check::new(
        7,
        "empty-data draws match the top-level priors",
        pass,
        format!(
            "mu_alpha {mu_alpha:.3}, mu_beta {mu_beta:.3}, sigma_alpha {sigma_alpha:.3}, \
             sigma_beta {sigma_beta:.3}, sigma {sigma:.3}, max R-hat {r_hat:.4}, {secs:.1} s"
        ),
        format!("{mu_alpha:?} {mu_beta:?} {sigma_alpha:?} {sigma_beta:?} {sigma:?} {r_hat:?}\n"),
    )
}

pub fn c8_generative_recovery() -> Check {
    let start = Instant::now();
    let truth = [0.2, 0.6, 0.9];
    let mut good = 0;
    let mut worst = 0.0f64;
    let mut out = String::new();
    for rep in 0..20u64 {
        let data = synth::model_data(800 + rep, &truth, 6, 10);
        let draws = sample(&data, &SamplerConfig::with_seed(rep)).unwrap();
        let est: Vec<f64> = (0..3)
            .map(|s| mean(draws.chains.iter().flatten().map(|p| p.scorer[s].mu_beta)))
            .collect();
        let err = est.iter().zip(&truth).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        let ordered = est[0] < est[1] && est[1] < est[2];
        good += (err <= 0.2 && ordered) as usize;
        writeln!(out, "{:?} {:?} {:?} {:?}", est[0], est[1], est[2], draws.diagnostics.max_r_hat).unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        8,
        "generative recovery of scorer slopes",
        good >= 18 && secs < 600.0,
        format!("{good}/20 repetitions within 0.2 and ordered (worst error {worst:.3}), {secs:.1} s"),
        out,
    )
}

pub struct LooRun {
    pub btb: f64,
    pub best_single: f64,
    pub max_r_hat: f64,
}

/// Leave-one-dataset-out over every dataset of `table`; returns the
/// aggregated weighted tau of predicted means against the truth, and of each
/// raw scorer.
pub fn loo_run(table: &TupleTable, config: &SamplerConfig) -> LooRun {
    let mut groups = Vec::new();
    let mut max_r_hat = 0.0f64;
    for held_out in table.datasets() {
        let outcome = calibrate_loo(table, &[], held_out, config).unwrap();
        let truth = outcome.truth.expect("held-out metrics are present");
        let means: Vec<f64> = outcome.predictions.iter().map(|p| p.mean).collect();
        groups.push(Group::new(held_out.clone(), means, truth));
        max_r_hat = max_r_hat.max(outcome.draws.diagnostics.max_r_hat);
    }
    let btb = aggregated_weighted_tau(&GroupedSeries::new(groups)).unwrap().value;
    let best_single = table
        .scorers()
        .iter()
        .map(|s| aggregated_weighted_tau(&group_by_dataset(table, s).unwrap()).unwrap().value)
        .fold(f64::NEG_INFINITY, f64::max);
    LooRun {
        btb,
        best_single,
        max_r_hat,
    }
}

pub fn c9_btb_improvement() -> Check {
    let start = Instant::now();
    let mut wins = 0;
    let mut out = String::new();
    for rep in 0..20u64 {
        let table = synth::heterogeneous_table(900 + rep, 11, 10);
        let run = loo_run(&table, &SamplerConfig::with_seed(rep));
        wins += (run.btb >= run.best_single) as usize;
        writeln!(out, "{:?} {:?}", run.btb, run.best_single).unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        9,
        "combined predictions beat the best single scorer",
        wins >= 15,
        format!("combined tau >= best single scorer in {wins}/20 repetitions, {secs:.1} s"),
        out,
    )
}

pub fn c11_runtime() -> Check {
    let table = synth::heterogeneous_table(1100, 11, 10);
    let config = SamplerConfig {
        warmup: 1000,
        keep: 1000,
        ..SamplerConfig::with_seed(11)
    };
    let start = Instant::now();
    let run = loo_run(&table, &config);
    let secs = start.elapsed().as_secs_f64();
    let threads = rayon::current_num_threads();
    Check::new(
        11,
        "full leave-one-out runtime",
        secs < 300.0,
        format!(
            "11 fits of 4 chains x 2000 transitions in {secs:.1} s on {threads} thread(s), max R-hat {:.4}",
            run.max_r_hat
        ),
        format!("{:?} {:?}\n", run.btb, run.max_r_hat),
    )
}
