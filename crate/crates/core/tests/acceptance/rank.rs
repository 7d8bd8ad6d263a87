//! Rank-statistic and bootstrap criteria.

use std::fmt::Write;
use std::time::Instant;

use rand::Rng;
use transfer_bench::data::{Group, GroupedSeries};
use transfer_bench::rank::{
    aggregated_weighted_tau, bootstrap, kendall_tau, weighted_tau,
    weighted_tau_with, Statistic,
};

use crate::synth;
use crate::Check;

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `1/(1+r)` averaged over the 0-based descending positions a value's ties
/// occupy: positions `above .. above + equal`.
fn oracle_weight(values: &[f64], i: usize) -> f64 {
    let above = values.iter().filter(|&&v| v > values[i]).count();
    let equal = values.iter().filter(|&&v| v == values[i]).count();
    (above..above + equal).map(|r| 1.0 / (1.0 + r as f64)).sum::<f64>() / equal as f64
}

/// Double sum over `i < j`, skipping pairs tied in both coordinates.
fn oracle_sums(x: &[f64], y: &[f64], weighted: bool) -> (f64, f64) {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            if x[i] == x[j] && y[i] == y[j] {
                continue;
            }
            let w = if weighted {
                oracle_weight(x, i) + oracle_weight(x, j) + oracle_weight(y, i) + oracle_weight(y, j)
            } else {
                1.0
            };
            num += w * sgn(x[i] - x[j]) * sgn(y[i] - y[j]);
            den += w;
        }
    }
    (num, den)
}

fn random_pair<R: Rng>(rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    loop {
        let n = rng.random_range(3..=12);
        let ties = rng.random_bool(0.5);
        let x = synth::vector(rng, n, ties);
        let y = synth::vector(rng, n, ties);
        // Keep instances where at least one pair counts.
        if oracle_sums(&x, &y, false).1 > 0.0 {
            return (x, y);
        }
    }
}

pub fn c1_tau_oracles() -> Check {
    let start = Instant::now();
    let mut rng = synth::rng(1, 0);
    let (mut max_err, mut out) = (0.0f64, String::new());
    for _ in 0..200 {
        let (x, y) = random_pair(&mut rng);
        let (kn, kd) = oracle_sums(&x, &y, false);
        let (wn, wd) = oracle_sums(&x, &y, true);
        let k = kendall_tau(&x, &y).unwrap();
        let w = weighted_tau(&x, &y).unwrap();
        max_err = max_err.max((k.value - kn / kd).abs()).max((w.value - wn / wd).abs());

        let n_groups = rng.random_range(1..=11);
        let mut groups = Vec::new();
        let (mut gn, mut gd) = (0.0, 0.0);
        for g in 0..n_groups {
            let (gx, gy) = random_pair(&mut rng);
            let (a, b) = oracle_sums(&gx, &gy, true);
            gn += a;
            gd += b;
            groups.push(Group::new(format!("g{g}"), gx, gy));
        }
        let agg = aggregated_weighted_tau(&GroupedSeries::new(groups)).unwrap();
        max_err = max_err.max((agg.value - gn / gd).abs());
        writeln!(out, "{:?} {:?} {:?}", k.value, w.value, agg.value).unwrap();
    }
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        1,
        "tau oracle equivalence",
        max_err <= 1e-12 && secs < 5.0,
        format!("max |err| {max_err:.2e} over 200 instances, {secs:.2} s"),
        out,
    )
}

pub fn c2_unit_weights() -> Check {
    let mut rng = synth::rng(2, 0);
    let mut mismatches = 0;
    let mut out = String::new();
    for _ in 0..100 {
        let (x, y) = random_pair(&mut rng);
        let forced = weighted_tau_with(&x, &y, |_, _| 1.0).unwrap();
        let k = kendall_tau(&x, &y).unwrap();
        if forced != k {
            mismatches += 1;
        }
        writeln!(out, "{:?}", forced.value).unwrap();
    }
    Check::new(
        2,
        "unit weights give Kendall tau",
        mismatches == 0,
        format!("{mismatches}/100 mismatches"),
        out,
    )
}

pub fn c3_single_group() -> Check {
    let mut rng = synth::rng(3, 0);
    let mut mismatches = 0;
    let mut out = String::new();
    for _ in 0..100 {
        let (x, y) = random_pair(&mut rng);
        let w = weighted_tau(&x, &y).unwrap();
        let agg = aggregated_weighted_tau(&GroupedSeries::single(Group::new("g", x, y))).unwrap();
        if w != agg {
            mismatches += 1;
        }
        writeln!(out, "{:?}", agg.value).unwrap();
    }
    Check::new(
        3,
        "single-group aggregation identity",
        mismatches == 0,
        format!("{mismatches}/100 mismatches"),
        out,
    )
}

/// Large-sample aggregated weighted tau: 10^5 groups of 10 points.
fn true_aggregated() -> f64 {
    let mut rng = synth::rng(4, 1);
    let g = synth::noisy_groups(&mut rng, 100_000, 10, 0.5);
    aggregated_weighted_tau(&g).unwrap().value
}

pub struct SpreadData {
    pub truth: f64,
    pub covered: usize,
    pub narrower: usize,
    pub secs: f64,
    pub out: String,
}

pub fn bootstrap_replications() -> SpreadData {
    let start = Instant::now();
    let truth = true_aggregated();
    let (mut covered, mut narrower) = (0, 0);
    let mut out = format!("{truth:?}\n");
    for rep in 0..200u64 {
        let mut rng = synth::rng(4, 100 + rep);
        let g = synth::noisy_groups(&mut rng, 11, 10, 0.5);
        let agg = bootstrap(&g, Statistic::AggregatedWeightedTau, 1000, rep).unwrap();
        let avg = bootstrap(&g, Statistic::AveragedWeightedTau, 1000, rep).unwrap();
        covered += (agg.ci_low <= truth && truth <= agg.ci_high) as usize;
        narrower += (agg.sd < avg.sd) as usize;
        writeln!(out, "{:?} {:?} {:?} {:?}", agg.ci_low, agg.ci_high, agg.sd, avg.sd).unwrap();
    }
    SpreadData {
        truth,
        covered,
        narrower,
        secs: start.elapsed().as_secs_f64(),
        out,
    }
}

pub fn c4_coverage(d: &SpreadData) -> Check {
    Check::new(
        4,
        "bootstrap CI coverage",
        d.covered as f64 >= 0.88 * 200.0 && d.secs < 180.0,
        format!(
            "{}/200 intervals cover the large-sample value {:.4} ({:.1} s)",
            d.covered, d.truth, d.secs
        ),
        d.out.clone(),
    )
}

pub fn c5_spread(d: &SpreadData) -> Check {
    Check::new(
        5,
        "aggregated tau spread below averaged",
        d.narrower as f64 >= 0.8 * 200.0,
        format!("bootstrap sd strictly smaller in {}/200 replications", d.narrower),
        d.out.clone(),
    )
}
