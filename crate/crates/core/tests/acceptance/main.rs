//! Acceptance suite. Prints one line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4,10` restricts the run to the listed criteria (the
//! determinism rerun then covers only those). `ACCEPTANCE_STRICT=1` makes the
//! process exit non-zero when any criterion fails.

mod btb;
mod rank;
mod scorers;
mod synth;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

pub struct Check {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Machine output compared across runs for determinism.
    pub output: String,
}

impl Check {
    pub fn new(id: usize, name: &str, pass: bool, detail: String, output: String) -> Self {
        Self {
            id,
            name: name.to_string(),
            pass,
            detail,
            output,
        }
    }

    fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!("[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn selection() -> BTreeSet<usize> {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) if !list.trim().is_empty() => list
            .split(',')
            .map(|s| s.trim().parse().expect("ACCEPTANCE_ONLY takes comma-separated ids"))
            .collect(),
        _ => (1..=12).collect(),
    }
}

fn run(want: &BTreeSet<usize>, report: bool) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |c: Check| {
        if report {
            println!("{}", c.line());
        }
        checks.push(c);
    };
    if want.contains(&1) {
        push(rank::c1_tau_oracles());
    }
    if want.contains(&2) {
        push(rank::c2_unit_weights());
    }
    if want.contains(&3) {
        push(rank::c3_single_group());
    }
    if want.contains(&4) || want.contains(&5) {
        let spread = rank::bootstrap_replications();
        if want.contains(&4) {
            push(rank::c4_coverage(&spread));
        }
        if want.contains(&5) {
            push(rank::c5_spread(&spread));
        }
    }
    if want.contains(&6) {
        push(btb::c6_gradient());
    }
    if want.contains(&7) {
        push(btb::c7_prior_recovery());
    }
    if want.contains(&8) {
        push(btb::c8_generative_recovery());
    }
    if want.contains(&9) {
        push(btb::c9_btb_improvement());
    }
    if want.contains(&10) {
        push(scorers::c10_scorer_oracles());
    }
    if want.contains(&11) {
        push(btb::c11_runtime());
    }
    checks
}

fn determinism(first: &[Check], want: &BTreeSet<usize>) -> Check {
    let start = Instant::now();
    let second = run(want, false);
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.output != b.output)
        .map(|(a, _)| a.id.to_string())
        .collect();
    let bytes: usize = first.iter().map(|c| c.output.len()).sum();
    let ids: Vec<String> = first.iter().map(|c| c.id.to_string()).collect();
    let detail = if differing.is_empty() {
        format!(
            "criteria {} rerun, {bytes} bytes identical ({:.1} s)",
            ids.join(","),
            start.elapsed().as_secs_f64()
        )
    } else {
        format!("outputs differ for criteria {}", differing.join(","))
    };
    Check::new(12, "determinism across runs", differing.is_empty(), detail, String::new())
}

fn main() -> ExitCode {
    let want = selection();
    println!(
        "acceptance: {} worker thread(s), criteria {:?}",
        rayon::current_num_threads(),
        want
    );
    let mut checks = run(&want, true);
    if want.contains(&12) {
        let c = determinism(&checks, &want);
        println!("{}", c.line());
        checks.push(c);
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
    println!(
        "acceptance: {}/{} criteria passed{}",
        checks.len() - failed.len(),
        checks.len(),
        if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(",")) }
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && !failed.is_empty() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
