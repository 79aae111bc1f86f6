//! `causal-pareto`: run experiments, compute reference fronts and compare
//! results on structural causal models.

mod cache;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CAUSAL_PARETO_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while doing the work: exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "causal-pareto",
    version,
    about = "Pareto-optimal interventions on structural causal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the optimizer over several seeds and write reports.
    Run(RunArgs),
    /// Brute-force reference front on a regular grid.
    GroundTruth(GroundTruthArgs),
    /// Compare the aggregate results of two or more run directories.
    Compare(CompareArgs),
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Structural causal model utilities.
    Scm {
        #[command(subcommand)]
        command: ScmCommand,
    },
}

#[derive(Debug, Subcommand)]
enum GraphCommand {
    /// Projection, MUCT, interventional border and POMIS as JSON.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Subcommand)]
enum ScmCommand {
    /// Monte-Carlo interventional means as JSON.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Args)]
struct ProblemArgs {
    /// Built-in problem: synthetic1, synthetic2 or health.
    #[arg(long, conflicts_with = "spec")]
    problem: Option<String>,
    /// Path to a model file.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Mocbo,
    Baseline,
    GraphAnalyze,
    GroundTruth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SetFamily {
    Pomis,
    All,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "mocbo")]
    mode: Mode,
    /// Optimization iterations.
    #[arg(long, default_value_t = 30)]
    iters: usize,
    #[arg(long, default_value_t = 5)]
    batch_size: usize,
    /// Initial evaluations per intervention set.
    #[arg(long, default_value_t = 5)]
    init_samples: usize,
    /// Monte-Carlo samples per interventional mean.
    #[arg(long, default_value_t = 10_000)]
    mc_samples: usize,
    /// Number of seeds split from the master seed.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points per dimension of the reference front.
    #[arg(long, default_value_t = 21)]
    grid: usize,
    /// Intervention sets to optimize over in mocbo mode.
    #[arg(long, value_enum, default_value = "pomis")]
    sets: SetFamily,
    /// Skip the reference front and the GD/IGD metrics.
    #[arg(long)]
    no_reference: bool,
    /// Save a checkpoint per seed after every iteration and resume from it.
    #[arg(long)]
    checkpoint: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GroundTruthArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 21)]
    grid: usize,
    #[arg(long, default_value_t = 10_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "pomis")]
    sets: SetFamily,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Run directories; the first is the one others are compared against.
    #[arg(required = true, num_args = 2..)]
    dirs: Vec<PathBuf>,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Path to a graph file (alternative to a model).
    #[arg(long, conflicts_with_all = ["problem", "spec"])]
    graph: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Intervention such as `X1=1.0,X2=0.5`; observational when omitted.
    #[arg(long = "do")]
    intervention: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::GroundTruth(args) => commands::ground_truth(args),
        Command::Compare(args) => commands::compare(args),
        Command::Graph {
            command: GraphCommand::Analyze(args),
        } => commands::analyze(args),
        Command::Scm {
            command: ScmCommand::Eval(args),
        } => commands::eval(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
