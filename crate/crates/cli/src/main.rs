//! `srgbm`: reproducible experiments on geometric Brownian motion with
//! stochastic resetting as a model of income dynamics.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Resolver;
use crate::error::CliError;

/// Income dynamics under geometric Brownian motion with stochastic resetting.
///
/// Units: time in years; drift mu and resetting rate r in 1/year; variance
/// rate sigma2 in 1/year; incomes in units of the reset level x0.
#[derive(Debug, Parser)]
#[command(name = "srgbm", version, about, long_about)]
struct Cli {
    /// Master random seed (integer); fixes every random draw of the run.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes any output.
    #[arg(long, global = true, value_name = "COUNT")]
    workers: Option<usize>,
    /// Directory for output tables and the run manifest [default: out].
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Key-value file (`key = value` per line) supplying defaults for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the regime, tail exponent, moment thresholds and long-time
    /// statistics of one parameter set.
    Classify(ModelArgs),
    /// Simulate populations and write ensemble mean and median income over time.
    Simulate(SimulateArgs),
    /// Compute inequality and mobility measures over the snapshots of a
    /// simulated or saved panel.
    Measure(MeasureArgs),
    /// Sweep the resetting rate and summarize stationary Gini against
    /// earnings elasticity.
    Gatsby(GatsbyArgs),
    /// Fit yearly drift and volatility to an observed top-share series.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Drift of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Variance rate sigma^2 of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    /// Resetting rate, 1/year [default: 0.06].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Reset income level, income units [default: 1].
    #[arg(long, value_name = "INCOME", allow_negative_numbers = true)]
    pub x0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Population size, individuals [default: 10000].
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    /// Time step, years; at most 0.1 [default: 0.01].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Simulated time span, years [default: 100].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    /// Interval between recorded snapshots, years; a multiple of dt [default: 1].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub every: Option<f64>,
    /// Initial incomes: `stationary` (draws from the long-time law) or `x0`
    /// (everyone at the reset level) [default: stationary].
    #[arg(long, value_name = "MODE")]
    pub init: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Drift of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Variance rate sigma^2 of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    /// Comma-separated resetting rates, 1/year, one population each
    /// [default: 0.01,0.04,0.12].
    #[arg(long, value_name = "PER_YEAR,...")]
    pub r: Option<String>,
    /// Reset income level, income units [default: 1].
    #[arg(long, value_name = "INCOME", allow_negative_numbers = true)]
    pub x0: Option<f64>,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also write the full income panel of each population.
    #[arg(long)]
    pub write_panel: bool,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Measure this saved panel (`time,slot,income` CSV) instead of simulating.
    #[arg(long, value_name = "FILE")]
    pub panel: Option<PathBuf>,
    /// Comma-separated top-share fractions, e.g. 0.01 for the top 1% [default: 0.01,0.1].
    #[arg(long, value_name = "FRACTION,...")]
    pub p_list: Option<String>,
    /// Lag between the snapshots compared by the mobility measures, years [default: 10].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GatsbyArgs {
    /// Drift of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Variance rate sigma^2 of income growth, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    /// Reset income level, income units [default: 1].
    #[arg(long, value_name = "INCOME", allow_negative_numbers = true)]
    pub x0: Option<f64>,
    /// Comma-separated resetting rates in (0, 0.2], 1/year
    /// [default: 0.01,0.02,...,0.12].
    #[arg(long, value_name = "PER_YEAR,...")]
    pub r_grid: Option<String>,
    /// Population size per realization, individuals [default: 10000].
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    /// Realizations per resetting rate [default: 100].
    #[arg(long, value_name = "COUNT")]
    pub reps: Option<usize>,
    /// Lag of the earnings elasticity, years [default: 10].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Time step, years [default: 0.01].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Observed top-share series, `year,value` CSV with values in (0, 1).
    #[arg(long, value_name = "FILE")]
    pub shares: Option<PathBuf>,
    /// Resetting-rate series, `year,value` CSV in 1/year.
    #[arg(long, value_name = "FILE")]
    pub resetting: Option<PathBuf>,
    /// Tail fraction of the share series, e.g. 0.01 for the top 1% [default: 0.01].
    #[arg(long, value_name = "FRACTION", allow_negative_numbers = true)]
    pub percentile: Option<f64>,
    /// Simulated population size, individuals [default: 100000].
    #[arg(long, value_name = "COUNT")]
    pub n: Option<usize>,
    /// Independent replicas of the whole fit [default: 25].
    #[arg(long, value_name = "COUNT")]
    pub reps: Option<usize>,
    /// Time step, years; must divide one year [default: 0.01].
    #[arg(long, value_name = "YEARS", allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// Half-width of the yearly search box in mu, 1/year [default: 0.02].
    #[arg(long, value_name = "PER_YEAR", allow_negative_numbers = true)]
    pub trust_mu: Option<f64>,
    /// Half-width of the yearly search box in sigma, 1/sqrt(year) [default: 0.02].
    #[arg(long, value_name = "PER_SQRT_YEAR", allow_negative_numbers = true)]
    pub trust_sigma: Option<f64>,
    /// Objective value above which a fit counts as failed, squared share units [default: 4e-4].
    #[arg(long, value_name = "VALUE", allow_negative_numbers = true)]
    pub floor: Option<f64>,
    /// First year to fit; defaults to the first year both series share.
    #[arg(long, value_name = "YEAR")]
    pub from: Option<i32>,
    /// Last year to fit; defaults to the last year both series share.
    #[arg(long, value_name = "YEAR")]
    pub to: Option<i32>,
}

/// Settings shared by every subcommand.
pub struct Global {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut res = Resolver::from_file(cli.config.as_deref())?;
    let seed = res.get("seed", cli.seed, 1u64)?;
    let workers = res.get_opt("workers", cli.workers)?;
    if workers == Some(0) {
        return Err(CliError::Config("--workers: must be at least 1".into()));
    }
    let out_dir = res.get("out-dir", cli.out_dir.map(|p| p.display().to_string()), "out".to_string())?;
    let global = Global {
        seed,
        workers,
        out_dir: PathBuf::from(out_dir),
    };
    let command = cli.command;
    let work = move || match command {
        Command::Classify(args) => commands::classify(args, &mut res),
        Command::Simulate(args) => commands::simulate(args, &global, &mut res),
        Command::Measure(args) => commands::measure(args, &global, &mut res),
        Command::Gatsby(args) => commands::gatsby(args, &global, &mut res),
        Command::Calibrate(args) => commands::calibrate(args, &global, &mut res),
    };
    srgbm_core::with_workers(workers, work)
        .map_err(|e| CliError::Config(format!("--workers: {e}")))?
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
