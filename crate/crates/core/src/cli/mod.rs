//! `mrq` command-line front end.
//!
//! `mrq estimate` runs the estimators on two GWAS summary-statistic files and
//! `mrq simulate` runs a Monte Carlo study. Every output carries a run
//! manifest with the fully resolved configuration. Exit codes: 0 success,
//! 2 usage or input error, 3 numerical failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};

mod estimate;
pub mod output;
mod simulate;

pub use estimate::{cmd_estimate, EstimateArgs};
pub use simulate::{cmd_simulate, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "mrq", version, about = "Mendelian randomization by weighted quantile regression")]
pub struct Cli {
    /// Maximum worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the causal effect from exposure and outcome GWAS files.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo simulation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Tsv,
}

/// Options shared by both subcommands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Comma-separated methods: mr-quantile, ivw, egger, weighted-median.
    #[arg(long, default_value = "mr-quantile,ivw,egger,weighted-median")]
    pub methods: String,
    /// Bootstrap replicates for mr-quantile and weighted-median.
    #[arg(long = "boot", default_value_t = 1000)]
    pub n_boot: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Two-sided level of the confidence intervals and tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Bootstrap interval type: normal or percentile.
    #[arg(long, default_value = "normal")]
    pub ci: String,
    /// Log-likelihood tolerance of the MR-Quantile solver.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record the wall-clock time in the manifest (breaks byte-reproducibility).
    #[arg(long)]
    pub stamp: bool,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, config: C, stamp: bool) -> Self {
        let timestamp = stamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        RunManifest {
            tool: "mrq",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            timestamp,
        }
    }

    pub fn one_line(&self) -> String {
        format!("manifest: {}", serde_json::to_string(self).expect("plain data serializes"))
    }
}

pub(crate) fn parse_flag<T: std::str::FromStr<Err = String>>(value: &str) -> Result<T> {
    value.parse::<T>().map_err(Error::InvalidConfig)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(Error::InvalidConfig("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Error::InvalidConfig(format!("thread pool: {e}"))),
        },
        None => dispatch(cli),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
