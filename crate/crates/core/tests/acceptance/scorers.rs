//! Scorer oracles.

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use transfer_bench::data::FeatureSet;
use transfer_bench::scorers::{
    fit_evidence, gbc, h_score, leep, logme, nce, parc, regularized_h_score,
    regularized_h_score_with, score_all, ScorerKind, Shrinkage,
};

use crate::synth;
use crate::Check;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn fs(f: DMatrix<f64>, labels: Vec<usize>, k: usize, probs: Option<DMatrix<f64>>) -> FeatureSet {
    FeatureSet::from_dense(f, labels, (0..k).map(|c| c.to_string()).collect(), probs).unwrap()
}

fn gaussian_set(seed: u64, n: usize, d: usize, k: usize) -> FeatureSet {
    let mut rng = synth::rng(seed, 10);
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let f = DMatrix::from_fn(n, d, |i, j| {
        rng.sample::<f64, _>(StandardNormal) + 0.8 * labels[i] as f64 * ((j % 3) as f64 - 1.0)
    });
    fs(f, labels, k, None)
}

struct Results {
    failures: Vec<String>,
    out: String,
}

impl Results {
    fn check(&mut self, name: &str, got: f64, expected: f64, tol: f64) {
        writeln!(self.out, "{name} {got:?}").unwrap();
        if !((got - expected).abs() <= tol) {
            self.failures.push(format!("{name}: {got} vs {expected}"));
        }
    }

    fn holds(&mut self, name: &str, ok: bool) {
        writeln!(self.out, "{name} {ok}").unwrap();
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}

/// Covariances by explicit loops; between-class covariance as the
/// covariance of class-mean-substituted rows.
fn covariances(x: &DMatrix<f64>, labels: &[usize], k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, d) = x.shape();
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let mut counts = vec![0.0; k];
    let mut class_mean = vec![vec![0.0; d]; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1.0;
        for j in 0..d {
            class_mean[l][j] += x[(i, j)];
        }
    }
    for l in 0..k {
        for j in 0..d {
            class_mean[l][j] /= counts[l];
        }
    }
    let mut sf = DMatrix::zeros(d, d);
    let mut sb = DMatrix::zeros(d, d);
    for i in 0..n {
        let cm = &class_mean[labels[i]];
        for a in 0..d {
            for b in 0..d {
                sf[(a, b)] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]) / n as f64;
                sb[(a, b)] += (cm[a] - mean[a]) * (cm[b] - mean[b]) / n as f64;
            }
        }
    }
    (sf, sb)
}

fn svd_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let max = svd.singular_values.max();
    svd.pseudo_inverse(1e-10 * max).unwrap()
}

fn h_oracle(x: &DMatrix<f64>, labels: &[usize], k: usize) -> f64 {
    let (sf, sb) = covariances(x, labels, k);
    (svd_pinv(&sf) * sb).trace()
}

/// Ledoit-Wolf coefficient from the squared-feature moment formulation.
fn lw_oracle(x: &DMatrix<f64>) -> f64 {
    let (n, d) = x.shape();
    let nf = n as f64;
    let mut c = x.clone();
    for j in 0..d {
        let m = c.column(j).mean();
        c.column_mut(j).add_scalar_mut(-m);
    }
    let x2 = c.map(|v| v * v);
    let emp: Vec<f64> = (0..d).map(|j| x2.column(j).sum() / nf).collect();
    let mu = emp.iter().sum::<f64>() / d as f64;
    let beta_ = (x2.transpose() * &x2).sum();
    let delta_ = (c.transpose() * &c).map(|v| v * v).sum() / (nf * nf);
    let beta = (beta_ / nf - delta_) / (d as f64 * nf);
    let delta = (delta_ - 2.0 * mu * emp.iter().sum::<f64>() + d as f64 * mu * mu) / d as f64;
    (beta.min(delta) / delta).clamp(0.0, 1.0)
}

fn h_checks(r: &mut Results) {
    let f = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 2.0, -2.0]);
    r.check("h_score identical means", h_score(&fs(f, vec![0, 0, 1, 1], 2, None)).unwrap().value, 0.0, 1e-15);
    let f = DMatrix::from_row_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
    r.check("h_score label feature", h_score(&fs(f, vec![1, 0, 1, 0], 2, None)).unwrap().value, 1.0, 1e-12);
    let set = gaussian_set(1, 50, 8, 3);
    let oracle = h_oracle(set.features(), set.labels(), 3);
    r.check("h_score dense oracle", h_score(&set).unwrap().value, oracle, 1e-8);

    let set = gaussian_set(2, 50, 8, 3);
    r.check(
        "reg_h_score zero shrinkage",
        regularized_h_score_with(&set, Shrinkage::Fixed(0.0)).unwrap().value,
        h_score(&set).unwrap().value,
        0.0,
    );
    let (sf, sb) = covariances(set.features(), set.labels(), 3);
    r.check(
        "reg_h_score full shrinkage",
        regularized_h_score_with(&set, Shrinkage::Fixed(1.0)).unwrap().value,
        sb.trace() * 8.0 / sf.trace(),
        1e-10,
    );
    let lambda = lw_oracle(set.features());
    let mu = sf.trace() / 8.0;
    let shrunk = &sf * (1.0 - lambda) + DMatrix::<f64>::identity(8, 8) * (lambda * mu);
    let expected = (shrunk.try_inverse().unwrap() * &sb).trace();
    r.check("reg_h_score Ledoit-Wolf oracle", regularized_h_score(&set).unwrap().value, expected, 1e-8);

    // Invertible linear maps: 50 random well-conditioned 8x8 transforms.
    let mut rng = synth::rng(10, 3);
    let base = gaussian_set(3, 60, 8, 3);
    let h0 = h_score(&base).unwrap().value;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a = DMatrix::from_fn(8, 8, |i, j| {
            rng.sample::<f64, _>(StandardNormal) * 0.3 + if i == j { 2.0 } else { 0.0 }
        });
        assert!(a.clone().try_inverse().is_some());
        let mapped = fs(base.features() * &a, base.labels().to_vec(), 3, None);
        worst = worst.max((h_score(&mapped).unwrap().value - h0).abs());
    }
    r.check("h_score linear-map invariance", worst, 0.0, 1e-6);
}

/// `log N(y; 0, F F^T / alpha + I / beta)` by Cholesky.
fn marginal(f: &DMatrix<f64>, y: &[f64], alpha: f64, beta: f64) -> f64 {
    let n = f.nrows();
    let cov = f * f.transpose() / alpha + DMatrix::<f64>::identity(n, n) / beta;
    let chol = cov.cholesky().unwrap();
    let yv = DVector::from_column_slice(y);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * (n as f64 * LN_2PI + log_det + yv.dot(&chol.solve(&yv)))
}

fn onehot(labels: &[usize], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), k, |i, c| (labels[i] == c) as u8 as f64)
}

fn logme_checks(r: &mut Results) {
    let labels: Vec<usize> = (0..8).map(|i| i % 2).collect();
    let zero = fs(DMatrix::zeros(8, 3), labels.clone(), 2, None);
    // y ~ N(0, I / beta), beta = N / |y|^2 = 2.
    let expected = 0.5 * (2f64.ln() - LN_2PI - 1.0);
    r.check("logme zero features", logme(&zero).unwrap().value, expected, 1e-12);
    let fits = fit_evidence(zero.features(), &onehot(&labels, 2)).unwrap();
    r.holds("logme zero features class symmetry", fits[0].log_evidence == fits[1].log_evidence);

    let f = DMatrix::from_column_slice(6, 1, &[0.9, 1.3, 0.2, -0.4, -1.1, 0.1]);
    let labels = vec![0, 0, 1, 1, 1, 0];
    let targets = onehot(&labels, 2);
    let fits = fit_evidence(&f, &targets).unwrap();
    for (c, fit) in fits.iter().enumerate() {
        let y: Vec<f64> = targets.column(c).iter().copied().collect();
        let mut best = f64::NEG_INFINITY;
        for i in 0..400 {
            let a = 10f64.powf(-3.0 + 6.0 * i as f64 / 399.0);
            for j in 0..400 {
                let b = 10f64.powf(-3.0 + 6.0 * j as f64 / 399.0);
                best = best.max(marginal(&f, &y, a, b));
            }
        }
        r.check(&format!("logme grid oracle class {c}"), fit.log_evidence, best, 1e-3);
    }

    let mut rng = synth::rng(10, 4);
    let n = 40;
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let good = DMatrix::from_fn(n, 4, |i, j| {
        0.5 * rng.sample::<f64, _>(StandardNormal) + if j == 0 { 2.0 * labels[i] as f64 } else { 0.0 }
    });
    let bad = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let dup = |m: &DMatrix<f64>| DMatrix::from_fn(2 * n, 4, |i, j| m[(i % n, j)]);
    let dl: Vec<usize> = (0..2 * n).map(|i| labels[i % n]).collect();
    let s = |m: DMatrix<f64>, l: Vec<usize>| logme(&fs(m, l, 2, None)).unwrap().value;
    let (sg, sb) = (s(good.clone(), labels.clone()), s(bad.clone(), labels.clone()));
    let (dg, db) = (s(dup(&good), dl.clone()), s(dup(&bad), dl));
    r.holds(
        "logme duplication keeps order",
        sg > sb && dg > db && dg >= sg && db >= sb && dg - sg < 1.0 && db - sb < 1.0,
    );
}

fn probs_set(labels: Vec<usize>, k: usize, probs: DMatrix<f64>) -> FeatureSet {
    let n = labels.len();
    let f = DMatrix::from_fn(n, 1, |i, _| i as f64);
    fs(f, labels, k, Some(probs))
}

fn label_checks(r: &mut Results) {
    let labels = vec![0, 1, 2, 0, 1, 2];
    let p = onehot(&labels, 3);
    r.check("nce aligned", nce(&probs_set(labels.clone(), 3, p.clone())).unwrap().value, 0.0, 0.0);
    r.check("leep one-hot", leep(&probs_set(labels, 3, p)).unwrap().value, 0.0, 1e-15);

    let labels = vec![0, 1, 0, 1];
    let constant = DMatrix::from_fn(4, 2, |_, c| if c == 0 { 0.9 } else { 0.1 });
    r.check("nce constant source", nce(&probs_set(labels, 2, constant)).unwrap().value, -(2f64.ln()), 1e-15);

    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let uniform = DMatrix::from_element(12, 5, 0.2);
    r.check("leep uniform", leep(&probs_set(labels, 3, uniform)).unwrap().value, -(3f64.ln()), 1e-12);

    // Random 3x3 joint for NCE.
    let mut rng = synth::rng(10, 5);
    let n = 60;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let p = DMatrix::from_fn(n, 3, |i, c| if z[i] == c { 0.6 } else { 0.2 });
    let mut counts = [[0.0f64; 3]; 3];
    for i in 0..n {
        counts[z[i]][labels[i]] += 1.0;
    }
    let mut expected = 0.0;
    for row in &counts {
        let pz: f64 = row.iter().sum::<f64>() / n as f64;
        for &c in row {
            let pzy = c / n as f64;
            if pzy > 0.0 {
                expected += pzy * (pzy / pz).ln();
            }
        }
    }
    r.check("nce joint oracle", nce(&probs_set(labels, 3, p)).unwrap().value, expected, 1e-12);

    // Random 20x3 probabilities, two target classes, for LEEP.
    let n = 20;
    let labels: Vec<usize> = (0..n).map(|i| (i * 7 % 5) % 2).collect();
    let raw = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() + 0.05);
    let p = DMatrix::from_fn(n, 3, |i, c| raw[(i, c)] / raw.row(i).sum());
    let mut joint = [[0.0f64; 3]; 2];
    for i in 0..n {
        for c in 0..3 {
            joint[labels[i]][c] += p[(i, c)] / n as f64;
        }
    }
    let mut expected = 0.0;
    for i in 0..n {
        let mut eep = 0.0;
        for c in 0..3 {
            let pc = joint[0][c] + joint[1][c];
            eep += joint[labels[i]][c] / pc * p[(i, c)];
        }
        expected += eep.ln() / n as f64;
    }
    r.check("leep brute force", leep(&probs_set(labels, 2, p)).unwrap().value, expected, 1e-12);
}

fn gbc_checks(r: &mut Results) {
    let one = |rows: &[f64], labels: Vec<usize>, k: usize| {
        fs(DMatrix::from_row_slice(rows.len(), 1, rows), labels, k, None)
    };
    r.check("gbc full overlap", gbc(&one(&[1.0, 3.0, 1.0, 3.0], vec![0, 0, 1, 1], 2)).unwrap().value, -1.0, 0.0);
    // Means 1 and 4, population variance 1: DB = 9 / 8.
    r.check(
        "gbc equal-variance closed form",
        gbc(&one(&[0.0, 2.0, 3.0, 5.0], vec![0, 0, 1, 1], 2)).unwrap().value,
        -(-9.0f64 / 8.0).exp(),
        1e-15,
    );
    // Three classes, each +-1 around its mean (variance 1).
    let means = [0.0, 1.0, 3.0];
    let rows: Vec<f64> = means.iter().flat_map(|m| [m - 1.0, m + 1.0]).collect();
    let labels = vec![0, 0, 1, 1, 2, 2];
    let mut expected = 0.0;
    for a in 0..3 {
        for b in (a + 1)..3 {
            expected -= (-(means[a] - means[b]).powi(2) / 8.0).exp();
        }
    }
    r.check("gbc three-class pairwise", gbc(&one(&rows, labels, 3)).unwrap().value, expected, 1e-14);
}

fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn parc_checks(r: &mut Results) {
    let labels = vec![0, 1, 2, 0, 1, 2, 1];
    let f = onehot(&labels, 3);
    r.check("parc one-hot", parc(&fs(f, labels, 3, None)).unwrap().value, 1.0, 1e-12);

    let mut rng = synth::rng(10, 6);
    let n = 60;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let f = DMatrix::from_fn(n, 6, |i, j| {
        rng.sample::<f64, _>(StandardNormal) + if j == labels[i] { 2.0 } else { 0.0 }
    });
    let mut permuted = labels.clone();
    permuted.shuffle(&mut rng);
    let null = parc(&fs(f, permuted, 3, None)).unwrap().value;
    r.holds("parc permutation null", null.abs() < 0.2);

    let rows = [
        [0.3, 1.2, -0.5],
        [1.1, -0.2, 0.4],
        [0.0, 0.9, 2.0],
        [-1.0, 0.5, 0.7],
        [0.8, 0.1, -1.3],
    ];
    let labels = vec![0, 1, 0, 1, 1];
    let f = DMatrix::from_fn(5, 3, |i, j| rows[i][j]);
    let y = onehot(&labels, 2);
    let (mut df, mut dy) = (Vec::new(), Vec::new());
    for i in 0..5 {
        for j in (i + 1)..5 {
            let fi: Vec<f64> = f.row(i).iter().copied().collect();
            let fj: Vec<f64> = f.row(j).iter().copied().collect();
            let yi: Vec<f64> = y.row(i).iter().copied().collect();
            let yj: Vec<f64> = y.row(j).iter().copied().collect();
            df.push(1.0 - corr(&fi, &fj));
            dy.push(1.0 - corr(&yi, &yj));
        }
    }
    let expected = corr(&ranks(&df), &ranks(&dy));
    r.check("parc N=5 hand Spearman", parc(&fs(f, labels, 2, None)).unwrap().value, expected, 1e-12);
}

fn composition_check(r: &mut Results) {
    let base = gaussian_set(4, 30, 5, 3);
    let mut rng = synth::rng(10, 7);
    let raw = DMatrix::from_fn(30, 4, |_, _| rng.random::<f64>() + 0.01);
    let p = DMatrix::from_fn(30, 4, |i, c| raw[(i, c)] / raw.row(i).sum());
    let set = fs(base.features().clone(), base.labels().to_vec(), 3, Some(p));
    let records = score_all(&set, &ScorerKind::ALL).unwrap();
    let ok = records.len() == 7
        && records.iter().zip(ScorerKind::ALL).all(|(rec, k)| rec.scorer == k && rec.value.is_finite());
    r.holds("score_all seven finite records", ok);
}

pub fn c10_scorer_oracles() -> Check {
    let mut r = Results {
        failures: Vec::new(),
        out: String::new(),
    };
    h_checks(&mut r);
    logme_checks(&mut r);
    label_checks(&mut r);
    gbc_checks(&mut r);
    parc_checks(&mut r);
    composition_check(&mut r);
    let total = r.out.lines().count();
    let detail = if r.failures.is_empty() {
        format!("{total}/{total} oracle checks")
    } else {
        format!("{} of {total} failed: {}", r.failures.len(), r.failures.join("; "))
    };
    Check::new(10, "scorer oracles", r.failures.is_empty(), detail, r.out)
}
