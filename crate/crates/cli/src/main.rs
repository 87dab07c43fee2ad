//! Command-line front end: analyze observed trial data, run design
//! optimization, run operating-characteristics simulations, and regenerate
//! the bundled reference tables.
//!
//! Exit codes: 0 on a clean run (regardless of study verdict), 2 on invalid
//! input or usage, 3 on numerical failure.

mod commands;
mod config;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use goldsci_core::Error as CoreError;

#[derive(Parser)]
#[command(
    name = "goldsci",
    version,
    about = "Simultaneous confidence intervals, design optimization and Monte Carlo operating \
             characteristics for three-arm gold-standard non-inferiority trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze observed trial data: bounds, filters and success verdicts.
    Analyze(AnalyzeArgs),
    /// Success probabilities and sample sizes under assumed true effects.
    Design(DesignArgs),
    /// Seeded Monte Carlo operating characteristics.
    Simulate(SimulateArgs),
    /// Regenerate the bundled reference tables and the worked example.
    Reproduce(ReproduceArgs),
}

/// Options shared by every subcommand.
#[derive(Args, Debug)]
struct CommonArgs {
    /// Flat key=value configuration file; flags override file values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the effective configuration (after merging) to this file.
    #[arg(long, value_name = "FILE")]
    dump_config: Option<PathBuf>,
    /// Output format: text, csv or json.
    #[arg(long, value_name = "FMT")]
    format: Option<String>,
    /// Write output to a file instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Design parameters shared by all subcommands.
#[derive(Args, Debug)]
struct ParamArgs {
    /// One-sided familywise level (default 0.025).
    #[arg(long)]
    alpha: Option<f64>,
    /// Non-inferiority margin; defaults to r * mu-r-hist when those are set.
    #[arg(long)]
    delta0: Option<f64>,
    /// Relevance margin; defaults to (1 - r) * mu-r-hist when those are set.
    #[arg(long)]
    delta1: Option<f64>,
    /// Margin fraction r in (0, 1).
    #[arg(long)]
    r: Option<f64>,
    /// Historical reference effect.
    #[arg(long)]
    mu_r_hist: Option<f64>,
    /// Decay base of the informative bounds (default 0.01).
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Observed mean in the experimental arm.
    #[arg(long)]
    mean_e: Option<f64>,
    /// Observed mean in the reference arm.
    #[arg(long)]
    mean_r: Option<f64>,
    /// Observed mean in the placebo arm.
    #[arg(long)]
    mean_p: Option<f64>,
    /// Known common standard deviation (alternative to per-arm SDs).
    #[arg(long)]
    sigma: Option<f64>,
    /// Observed SD in the experimental arm (pooled-variance mode).
    #[arg(long)]
    sd_e: Option<f64>,
    /// Observed SD in the reference arm.
    #[arg(long)]
    sd_r: Option<f64>,
    /// Observed SD in the placebo arm.
    #[arg(long)]
    sd_p: Option<f64>,
    /// Experimental arm size.
    #[arg(long)]
    n_e: Option<usize>,
    /// Reference arm size.
    #[arg(long)]
    n_r: Option<usize>,
    /// Placebo arm size.
    #[arg(long)]
    n_p: Option<usize>,
    /// Method: iu, informative, single-step, baseline or all (default all).
    #[arg(long)]
    method: Option<String>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Assumed true effect mu_E - mu_P.
    #[arg(long)]
    effect_ep: Option<f64>,
    /// Assumed true effect mu_R - mu_P.
    #[arg(long)]
    effect_rp: Option<f64>,
    /// Reference-strength ratio v (requires --mu-r-hist); effect_rp = v * mu_r_hist.
    #[arg(long)]
    v: Option<f64>,
    /// Mixture "v:weight,v:weight" over reference-strength ratios.
    #[arg(long)]
    mixture: Option<String>,
    /// Common standard deviation of the observations.
    #[arg(long)]
    sigma: Option<f64>,
    /// Method: iu, informative, single-step or baseline.
    #[arg(long)]
    method: Option<String>,
    /// Target success probability (default 0.9).
    #[arg(long)]
    target_power: Option<f64>,
    /// Fixed allocation ratio n_R / n_E (with --c-p: no optimization).
    #[arg(long)]
    c_r: Option<f64>,
    /// Fixed allocation ratio n_P / n_E.
    #[arg(long)]
    c_p: Option<f64>,
    /// Monte Carlo replications for the informative method (default 100000).
    #[arg(long)]
    mc_reps: Option<u64>,
    /// Monte Carlo seed for the informative method.
    #[arg(long)]
    mc_seed: Option<u64>,
    /// Cap on the experimental arm size during the search.
    #[arg(long)]
    n_e_cap: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Assumed true effect mu_E - mu_P.
    #[arg(long)]
    effect_ep: Option<f64>,
    /// Assumed true effect mu_R - mu_P (single run).
    #[arg(long)]
    effect_rp: Option<f64>,
    /// Comma-separated v grid (requires --mu-r-hist); one run per value.
    #[arg(long)]
    v_list: Option<String>,
    /// Common standard deviation of the observations.
    #[arg(long)]
    sigma: Option<f64>,
    /// Experimental arm size.
    #[arg(long)]
    n_e: Option<usize>,
    /// Reference arm size.
    #[arg(long)]
    n_r: Option<usize>,
    /// Placebo arm size.
    #[arg(long)]
    n_p: Option<usize>,
    /// Comma-separated methods, or all (default all).
    #[arg(long)]
    methods: Option<String>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<u64>,
    /// RNG seed (default 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Target: table1, table2, table4 or example.
    target: String,
    /// Directory for the generated CSV files and manifest.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Replications for table4 (default 100000).
    #[arg(long)]
    reps: Option<u64>,
    /// Seed for table4 (default 42).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

/// Command error carrying the process exit code.
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Validation(_) | CoreError::UnsupportedMode(_) => {
                CliError::usage(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

impl From<String> for CliError {
    fn from(message: String) -> Self {
        CliError::usage(message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => commands::run_analyze(args),
        Command::Design(args) => commands::run_design(args),
        Command::Simulate(args) => commands::run_simulate(args),
        Command::Reproduce(args) => reproduce::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
