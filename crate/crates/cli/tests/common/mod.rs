#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use transfer_bench::data::{save_fset, save_tuples, FeatureSet, TransferTuple, TupleTable};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_transfer-bench"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small LCG so fixtures need no RNG dependency.
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform().max(1e-300);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

/// Writes `<dataset>__<arch>.fset` files with two labelled clusters.
pub fn write_features(dir: &Path, datasets: &[&str], archs: &[&str], probs: bool) {
    let mut rng = Lcg::new(3);
    for d in datasets {
        for a in archs {
            let n = 24;
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let f = DMatrix::from_fn(n, 4, |i, j| rng.normal() + if j == labels[i] { 1.5 } else { 0.0 });
            let p = probs.then(|| {
                DMatrix::from_fn(n, 3, |i, c| if c == labels[i] { 0.6 } else { 0.2 })
            });
            let fs = FeatureSet::from_dense(f, labels, vec!["a".into(), "b".into(), "c".into()], p).unwrap();
            save_fset(&fs, dir.join(format!("{d}__{a}.fset"))).unwrap();
        }
    }
}

/// `datasets` x `archs` tuples for three scorers of decreasing reliability.
pub fn synthetic_table(seed: u64, datasets: usize, archs: usize) -> TupleTable {
    let mut rng = Lcg::new(seed);
    let mut tuples = Vec::new();
    for d in 0..datasets {
        let metric: Vec<f64> = (0..archs).map(|_| 0.5 + 0.45 * rng.uniform()).collect();
        for (k, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
            let slope = 1.0 - 0.3 * k as f64 + 0.3 * rng.normal();
            for a in 0..archs {
                tuples.push(TransferTuple {
                    architecture: format!("arch{a:02}"),
                    dataset: format!("data{d:02}"),
                    scorer: name.to_string(),
                    score: slope * 10.0 * metric[a] + 0.5 * rng.normal(),
                    metric: Some(metric[a]),
                });
            }
        }
    }
    TupleTable::new(tuples).unwrap()
}

/// A scorer whose scores equal the metrics, over `datasets` datasets.
pub fn perfect_table(datasets: usize, archs: usize) -> TupleTable {
    let mut rng = Lcg::new(11);
    let mut tuples = Vec::new();
    for d in 0..datasets {
        for a in 0..archs {
            let m = 0.3 + 0.6 * rng.uniform();
            tuples.push(TransferTuple {
                architecture: format!("arch{a}"),
                dataset: format!("data{d}"),
                scorer: "oracle".into(),
                score: m,
                metric: Some(m),
            });
        }
    }
    TupleTable::new(tuples).unwrap()
}

pub fn save(table: &TupleTable, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    save_tuples(table, &path).unwrap();
    path
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}
