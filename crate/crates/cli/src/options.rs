//! Command-line flags, the optional key=value config file, and the resolved
//! run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_CHAINS: usize = 4;
pub const DEFAULT_WARMUP: usize = 1000;
pub const DEFAULT_KEEP: usize = 1000;
pub const DEFAULT_OUT: &str = "out";
pub const DEFAULT_STATS: &str = "weighted_tau,averaged_weighted_tau,aggregated_weighted_tau";

#[derive(Debug, Parser)]
#[command(name = "transfer-bench", version, about = "Transferability scoring, benchmarking and scorer combination")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every `<dataset>__<arch>.fset` file in a directory.
    Score(Flags),
    /// Bootstrap rank correlations between scores and metrics.
    Bench(Flags),
    /// Calibrate the hierarchical model and predict held-out candidates.
    Btb(Flags),
    /// Emit plot-ready data from bench and btb outputs.
    Report(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("format must be csv or json, got `{s}`")),
        }
    }
}

/// Flags shared by every subcommand. Each may also be given in the config
/// file under the same name without the leading dashes.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// key=value file mirroring these flags; flags win.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Tuple CSV (`dataset,architecture,scorer,score,metric`).
    #[arg(long, value_name = "PATH")]
    pub tuples: Option<PathBuf>,
    /// Directory of feature files for `score`.
    #[arg(long, value_name = "PATH")]
    pub features_dir: Option<PathBuf>,
    /// CSV `dataset,architecture,metric` used by `score` to fill the metric column.
    #[arg(long, value_name = "PATH")]
    pub metrics: Option<PathBuf>,
    /// Comma-separated scorer ids.
    #[arg(long, value_name = "LIST")]
    pub scorers: Option<String>,
    /// Comma-separated statistic ids for `bench` [default: weighted_tau,averaged_weighted_tau,aggregated_weighted_tau].
    #[arg(long, value_name = "LIST")]
    pub stat: Option<String>,
    /// Bootstrap iterations [default: 1000].
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
    /// Seed for bootstrap and sampling [default: 0].
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Comma-separated datasets to hold out, or `all` [default: all].
    #[arg(long, value_name = "DATASET")]
    pub hold_out: Option<String>,
    /// Prediction tuple CSV for `btb`; when given, no dataset is held out.
    #[arg(long, value_name = "PATH")]
    pub predict: Option<PathBuf>,
    /// Chains [default: 4].
    #[arg(long, value_name = "N")]
    pub chains: Option<usize>,
    /// Warmup transitions per chain [default: 1000].
    #[arg(long, value_name = "N")]
    pub warmup: Option<usize>,
    /// Retained transitions per chain [default: 1000].
    #[arg(long, value_name = "N")]
    pub keep: Option<usize>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Machine-readable output format [default: csv].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write posterior draws as `chain,draw,parameter,value` CSV.
    #[arg(long)]
    pub save_draws: bool,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tuples: Option<PathBuf>,
    pub features_dir: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub scorers: Vec<String>,
    pub stats: Vec<String>,
    pub iterations: usize,
    pub seed: u64,
    pub hold_out: Vec<String>,
    pub predict: Option<PathBuf>,
    pub chains: usize,
    pub warmup: usize,
    pub keep: usize,
    pub out: PathBuf,
    pub format: Format,
    pub save_draws: bool,
}

fn list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// Parses `key = value` lines; `#` starts a comment, values may be quoted.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("config line {}: expected key = value", i + 1)))?;
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        out.insert(key.trim().replace('_', "-"), value.to_string());
    }
    Ok(out)
}

fn parsed<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    raw.parse()
        .map_err(|e| CliError::input(format!("config key `{key}`: {e}")))
}

impl Flags {
    /// Fills every flag not given on the command line from `file`.
    fn merge(mut self, file: &BTreeMap<String, String>) -> Result<Self, CliError> {
        for (key, raw) in file {
            let path = || Some(PathBuf::from(raw));
            match key.as_str() {
                "tuples" => self.tuples = self.tuples.or_else(path),
                "features-dir" => self.features_dir = self.features_dir.or_else(path),
                "metrics" => self.metrics = self.metrics.or_else(path),
                "predict" => self.predict = self.predict.or_else(path),
                "out" => self.out = self.out.or_else(path),
                "scorers" => self.scorers = self.scorers.or_else(|| Some(raw.clone())),
                "stat" => self.stat = self.stat.or_else(|| Some(raw.clone())),
                "hold-out" => self.hold_out = self.hold_out.or_else(|| Some(raw.clone())),
                "iterations" if self.iterations.is_none() => self.iterations = Some(parsed(key, raw)?),
                "seed" if self.seed.is_none() => self.seed = Some(parsed(key, raw)?),
                "chains" if self.chains.is_none() => self.chains = Some(parsed(key, raw)?),
                "warmup" if self.warmup.is_none() => self.warmup = Some(parsed(key, raw)?),
                "keep" if self.keep.is_none() => self.keep = Some(parsed(key, raw)?),
                "format" if self.format.is_none() => self.format = Some(parsed(key, raw)?),
                "save-draws" => self.save_draws |= parsed::<bool>(key, raw)?,
                "iterations" | "seed" | "chains" | "warmup" | "keep" | "format" => {}
                other => return Err(CliError::input(format!("unknown config key `{other}`"))),
            }
        }
        Ok(self)
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let flags = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
                self.clone().merge(&parse_config(&text)?)?
            }
            None => self,
        };
        let hold_out = flags.hold_out.as_deref().map(list).unwrap_or_default();
        Ok(RunConfig {
            tuples: flags.tuples,
            features_dir: flags.features_dir,
            metrics: flags.metrics,
            scorers: flags.scorers.as_deref().map(list).unwrap_or_default(),
            stats: list(flags.stat.as_deref().unwrap_or(DEFAULT_STATS)),
            iterations: flags.iterations.unwrap_or(DEFAULT_ITERATIONS),
            seed: flags.seed.unwrap_or(DEFAULT_SEED),
            hold_out: if hold_out.iter().any(|h| h == "all") { Vec::new() } else { hold_out },
            predict: flags.predict,
            chains: flags.chains.unwrap_or(DEFAULT_CHAINS),
            warmup: flags.warmup.unwrap_or(DEFAULT_WARMUP),
            keep: flags.keep.unwrap_or(DEFAULT_KEEP),
            out: flags.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            format: flags.format.unwrap_or(Format::Csv),
            save_draws: flags.save_draws,
        })
    }
}

impl RunConfig {
    pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        value
            .as_deref()
            .ok_or_else(|| CliError::input(format!("--{flag} is required")))
    }
}
