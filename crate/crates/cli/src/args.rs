//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qggm_core::simgen::PatternKind;
use qggm_core::symmetrize::SymmetrizeMode;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("QGGM_GIT_DESCRIBE"));

#[derive(Debug, Parser)]
#[command(name = "qggm", version = VERSION, about = "Quasi-Bayesian graphical horseshoe experiments")]
pub struct Cli {
    /// File of `key = value` lines supplying defaults for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads. Defaults to the number of logical cores.
    #[arg(long, global = true, env = "QGGM_JOBS", value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a ground truth and replicate datasets.
    Simulate(SimulateArgs),
    /// Fit the quasi-posterior to one or more datasets.
    Fit(FitArgs),
    /// Score fits against a ground truth and build the summary table.
    Evaluate(EvaluateArgs),
    /// Write ROC curves of fits against a ground truth.
    Roc(RocArgs),
    /// Write trace CSVs and Gelman-Rubin statistics of a fit.
    Diagnose(DiagnoseArgs),
    /// Check the prior concentration and thickness conditions.
    CheckPrior(CheckPriorArgs),
    /// Time one simulate-and-fit run end to end.
    Bench(BenchArgs),
}

fn parse_pattern(s: &str) -> Result<PatternKind, String> {
    s.parse().map_err(|e: qggm_core::Error| e.to_string())
}

fn parse_symmetrize(s: &str) -> Result<SymmetrizeMode, String> {
    s.parse().map_err(|e: qggm_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// random, hubs, cliques, hubs-random, cliques-random or hubs-cliques.
    #[arg(long, value_parser = parse_pattern)]
    pub pattern: PatternKind,
    #[arg(long = "p", default_value_t = 100)]
    pub p: usize,
    #[arg(long = "n", default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Seed of the ground truth; replicate r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GibbsArgs {
    #[arg(long, default_value_t = 6000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use the known diagonal (from --truth, else all ones) instead of estimating it.
    #[arg(long)]
    pub known_diag: bool,
    #[arg(long, value_parser = parse_symmetrize, default_value = "auto")]
    pub symmetrize: SymmetrizeMode,
    /// Cross-validation folds of the diagonal estimator.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Headerless n×p CSV. Repeat for several datasets.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Ground truth JSON: the Frobenius trace reference and the known diagonal.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gibbs: GibbsArgs,
    /// Credible level stored with the summary.
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    /// Skip writing samples.bin.
    #[arg(long)]
    pub no_samples: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Fit directory. Repeatable.
    #[arg(long = "fit", required_unless_present = "estimates")]
    pub fits: Vec<PathBuf>,
    /// Ground truth JSON, shared by all fits or one per fit.
    #[arg(long = "truth", required = true)]
    pub truths: Vec<PathBuf>,
    /// Point estimate from another method as a p×p CSV. Repeatable.
    #[arg(long = "estimate")]
    pub estimates: Vec<PathBuf>,
    /// Method tag for the --estimate rows.
    #[arg(long, default_value = "external")]
    pub method: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
}

#[derive(Debug, Clone, Args)]
pub struct RocArgs {
    #[arg(long = "fit", required = true)]
    pub fits: Vec<PathBuf>,
    #[arg(long = "truth", required = true)]
    pub truths: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of log-spaced credible levels.
    #[arg(long, default_value_t = qggm_core::metrics::DEFAULT_ROC_POINTS)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub fit: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Trailing window for the trace stability check.
    #[arg(long, default_value_t = 500)]
    pub window: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CheckPriorArgs {
    /// Global scale. Defaults to a_n² / p².
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub a_n: f64,
    #[arg(long, default_value_t = 1.0)]
    pub e_n: f64,
    #[arg(long = "p", default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub u: f64,
    #[arg(long, default_value_t = 2.0)]
    pub c: f64,
    /// Also write the record to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_pattern, default_value = "cliques")]
    pub pattern: PatternKind,
    #[arg(long = "p", default_value_t = 100)]
    pub p: usize,
    #[arg(long = "n", default_value_t = 150)]
    pub n: usize,
    #[command(flatten)]
    pub gibbs: GibbsArgs,
    #[arg(long)]
    pub out: PathBuf,
}
