use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod table;

/// Fit, evaluate and benchmark single-neuron grouping classifiers.
#[derive(Debug, Parser)]
#[command(name = "sing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split, fit delta (and optionally the network), score the held-out part.
    Fit(FitArgs),
    /// Score a saved model on a dataset split.
    Eval(EvalArgs),
    /// Run the benchmark protocol over several seeds and compare with the
    /// published figures.
    Reproduce(ReproduceArgs),
    /// Run the optimizer on the built-in test functions.
    MostDemo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DatasetName {
    Iris,
    Car,
    Abalone,
}

impl DatasetName {
    fn benchmark(self) -> sing::protocol::Benchmark {
        use sing::protocol::Benchmark;
        match self {
            DatasetName::Iris => Benchmark::Iris,
            DatasetName::Car => Benchmark::Car,
            DatasetName::Abalone => Benchmark::Abalone,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    #[arg(long, value_enum)]
    dataset: DatasetName,
    /// Data file; defaults to `data/<dataset>.data`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Train on every sample, test samples included.
    #[arg(long)]
    leak_test_from_full: bool,
}

impl DataArgs {
    fn path(&self) -> PathBuf {
        self.data
            .clone()
            .unwrap_or_else(|| PathBuf::from("data").join(self.dataset.benchmark().file_name()))
    }
}

#[derive(Debug, Clone, Args)]
struct OptimizerArgs {
    /// Samples per region score.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Parts per variable in the initial scan.
    #[arg(long, default_value_t = 20)]
    divisions: usize,
    /// Stop once every interval is narrower than this fraction of its
    /// original width.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 60)]
    max_sweeps: usize,
    #[arg(long)]
    no_initial_scan: bool,
}

#[derive(Debug, Clone, Args)]
struct SingArgs {
    /// Upper end of every delta search interval.
    #[arg(long)]
    delta_max: Option<f64>,
    /// Relearn unknown test samples during the final evaluation (default).
    #[arg(long, overrides_with = "no_relearn")]
    relearn: bool,
    #[arg(long, overrides_with = "relearn")]
    no_relearn: bool,
    /// Relearn unknown fold samples while fitting delta.
    #[arg(long)]
    relearn_during_fit: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    sing: SingArgs,
    /// Also fit the comparison network.
    #[arg(long)]
    nn: bool,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model dump written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Seed of the split whose held-out part is scored.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Score every sample in the file instead of the held-out part.
    #[arg(long)]
    all: bool,
    #[arg(long)]
    no_relearn: bool,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = sing::protocol::REPRODUCE_SEEDS)]
    seeds: Vec<u64>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    sing: SingArgs,
    /// Samples per region score for the network.
    #[arg(long)]
    nn_mc_samples: Option<usize>,
    #[arg(long)]
    skip_nn: bool,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(args) => commands::fit(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Reproduce(args) => commands::reproduce(&args),
        Command::MostDemo(args) => commands::most_demo(&args),
    };
    match outcome {
        Ok(commands::Status::Pass) => ExitCode::SUCCESS,
        Ok(commands::Status::BelowThreshold) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
