use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "ltrc", version, about = "Weibull competing-risks inference for left-truncated, right-censored data")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "LTRC_THREADS")]
    pub threads: Option<usize>,

    /// Directory for CSV/JSON artifacts and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Maximum likelihood fit (common shape, or separate shapes).
    Fit(FitArgs),
    /// Parametric bootstrap confidence intervals.
    Bootstrap(BootstrapArgs),
    /// Posterior sampling, Bayes estimates and credible intervals.
    Bayes(BayesArgs),
    /// Likelihood-ratio test of equal shapes.
    Lrt(DataArgs),
    /// Profile log-likelihood and discriminants on the shape grid.
    Profile(ProfileArgs),
    /// Monte Carlo study from a named preset.
    Simulate(SimulateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataArgs {
    /// Transformer-format CSV (`sn,install_year,exit_year,nu,delta`);
    /// the bundled data set when omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,

    /// Divisor applied to times in years.
    #[arg(long, default_value_t = 100.0)]
    pub scale: f64,

    #[arg(long = "trunc-year", default_value_t = 1980)]
    pub trunc_year: i32,

    #[arg(long = "censor-year", default_value_t = 2008)]
    pub censor_year: i32,

    /// Convergence tolerance of the shape solver.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Also fit cause-specific shapes.
    #[arg(long)]
    pub separate: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Resample from the separate-shape fit.
    #[arg(long)]
    pub separate: bool,

    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,

    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95")]
    pub level: Vec<f64>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Sample the separate-shape posterior.
    #[arg(long)]
    pub separate: bool,

    /// Posterior draws.
    #[arg(long = "N", default_value_t = 10_000)]
    pub n: usize,

    /// Credible levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95")]
    pub level: Vec<f64>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Prior rate used in the shifted discriminant.
    #[arg(long, default_value_t = 1e-4)]
    pub b0: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// table1 .. table8.
    #[arg(long)]
    pub preset: String,

    #[arg(long, default_value_t = 200)]
    pub replications: usize,

    /// Use the full 1000 replications.
    #[arg(long)]
    pub full: bool,

    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,

    #[arg(long = "N", default_value_t = 10_000)]
    pub n: usize,

    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95")]
    pub level: Vec<f64>,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Path to a `manifest.json` written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}
