//! `birthrace`: run the race, urn, ranking, and dispersion experiments from
//! the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const FEEDBACK_HELP: &str = "\
Feedback functions f(m), m = 0, 1, 2, ...:
  power:P                     (m + 1)^P
  const:C                     C for every m
  table:V0,V1,...[;tail=R]    listed values, then R = repeat (last value) or
                              power (extrapolated from the last two)

Waiting-time models (--model):
  exponential feedback=F      X_j ~ Exp(f(j - 1))
  gamma shape=K feedback=F    X_j ~ Gamma(K, rate f(j - 1))
  uniform base=B jitter=W     X_j = B + W U
  empirical samples=S1,S2,... X_j drawn from the list

Every run writes config.toml to --out; passing it back with --config
reproduces the run bit for bit. Exit status: 0 success, 1 failed --check,
2 usage or configuration error.";

#[derive(Parser)]
#[command(name = "birthrace", version, about = "Competing birth processes and balls-in-bins with feedback", after_help = FEEDBACK_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one race and dump its events
    Race(RaceArgs),
    /// Simulate one balls-in-bins trajectory and write it as CSV
    Urn(UrnArgs),
    /// Track which orderings of the bins occur over replicated urn runs
    Coverage(CoverageArgs),
    /// Estimate the mean ranking weight of every permutation at fixed times
    Xi(XiArgs),
    /// Compare the jump chain of exponential races with the exact urn law
    Couple(CoupleArgs),
    /// Classify the symmetrized dispersion series as divergent or convergent
    Regime(RegimeArgs),
    /// Tabulate the concentration of partial sums against the dispersion sum
    Petrov(PetrovArgs),
    /// Randomized exact checks of the shift inequality for monotone and unimodal functions
    UnimodalFuzz(FuzzArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// TOML file with run parameters; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for the effective config, results, and summary
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Master seed
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on this
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Exit with status 1 unless the run's acceptance check passes
    #[arg(long)]
    pub check: bool,
}

#[derive(Args)]
pub struct RaceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of agents, all starting at value 0
    #[arg(long)]
    pub agents: Option<usize>,
    /// Starting values, one per agent
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    /// Waiting-time model
    #[arg(long, conflicts_with = "feedback")]
    pub model: Option<String>,
    /// Exponential waits with this feedback
    #[arg(long)]
    pub feedback: Option<String>,
    /// Run until time T
    #[arg(long, value_name = "T", conflicts_with = "events")]
    pub t: Option<f64>,
    /// Run for this many events
    #[arg(long)]
    pub events: Option<u64>,
    /// Stop with an explosion after this many events
    #[arg(long)]
    pub event_cap: Option<u64>,
    /// jsonl or csv
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args)]
pub struct UrnArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of bins, each starting with one ball
    #[arg(long)]
    pub agents: Option<usize>,
    /// Starting bin counts
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    #[arg(long)]
    pub feedback: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
}

#[derive(Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of bins, each starting with one ball
    #[arg(long)]
    pub agents: Option<usize>,
    /// Starting bin counts
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    #[arg(long)]
    pub feedback: Option<String>,
    /// Steps per replicate; a replicate stops early once every ordering is seen
    #[arg(long)]
    pub steps: Option<u64>,
    /// weak (ties count for every consistent ordering) or strict
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Args)]
pub struct XiArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub agents: Option<usize>,
    /// Observation times
    #[arg(long = "t", value_name = "T", value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Per-agent time shifts
    #[arg(long, value_delimiter = ',')]
    pub shifts: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "feedback")]
    pub model: Option<String>,
    /// Exponential waits with this feedback
    #[arg(long)]
    pub feedback: Option<String>,
    #[arg(long)]
    pub replicates: Option<u64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub event_cap: Option<u64>,
}

#[derive(Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub feedback: Option<String>,
    /// Starting bin counts
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    /// Length of the compared jumper sequence
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Args)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub feedback: Option<String>,
    /// Window widths for the dispersion function
    #[arg(long = "lambda", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Largest level summed
    #[arg(long)]
    pub j_max: Option<u64>,
    /// Number of urn bins for the leader check, each starting with one ball
    #[arg(long)]
    pub agents: Option<usize>,
    /// Starting urn counts for the leader check
    #[arg(long, value_delimiter = ',')]
    pub initial: Option<Vec<u64>>,
    /// Urn steps at which the leading bin is recorded
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Option<Vec<u64>>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Args)]
pub struct PetrovArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, conflicts_with = "feedback")]
    pub model: Option<String>,
    /// Exponential waits with this feedback
    #[arg(long)]
    pub feedback: Option<String>,
    /// Partial-sum lengths
    #[arg(long = "n", value_name = "N", value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Independent copies of the partial sums
    #[arg(long)]
    pub samples: Option<u64>,
    /// raw or symmetrized
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub replicates: Option<u64>,
}

#[derive(Args)]
pub struct FuzzArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trials per shape
    #[arg(long)]
    pub trials: Option<u64>,
    /// increasing, unimodal, or both
    #[arg(long)]
    pub shape: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Race(a) => commands::race(a),
        Command::Urn(a) => commands::urn(a),
        Command::Coverage(a) => commands::coverage(a),
        Command::Xi(a) => commands::xi(a),
        Command::Couple(a) => commands::couple(a),
        Command::Regime(a) => commands::regime(a),
        Command::Petrov(a) => commands::petrov(a),
        Command::UnimodalFuzz(a) => commands::unimodal_fuzz(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
