//! `mshap` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or malformed input file, 2 invalid
//! configuration or arguments, 3 rejection sampling gave up
//! (no interventional draw landed in the manifold).

mod attribute;
mod experiment;
mod manifold;
mod robustness;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "mshap", version, about = "Manifold-restricted Shapley attributions")]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Attribute every row of a CSV dataset.
    Attribute(attribute::AttributeArgs),
    /// Fit a manifold on a CSV dataset and report its held-out in-fraction.
    Manifold(manifold::ManifoldArgs),
    /// Run or list the built-in experiments.
    #[command(subcommand)]
    Experiment(experiment::ExperimentCommand),
    /// Compare value functions of a model and its perturbations.
    Robustness(robustness::RobustnessArgs),
    /// Draw observational samples from a built-in SCM into a CSV.
    Sample(spec::SampleArgs),
}

/// Flags shared by every subcommand that computes something.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON config file; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mshap::Error>() {
            return match e.root() {
                mshap::Error::AcceptanceFailure { .. } => 3,
                mshap::Error::Io { .. } | mshap::Error::Csv { .. } | mshap::Error::Parse { .. } => 1,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    2
}

/// The context chain down to the first library error, whose message already
/// includes its own sources.
fn message(err: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in err.chain() {
        parts.push(cause.to_string());
        if cause.downcast_ref::<mshap::Error>().is_some() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Attribute(a) => attribute::run(a),
        Command::Manifold(a) => manifold::run(a),
        Command::Experiment(c) => experiment::run(c),
        Command::Robustness(a) => robustness::run(a),
        Command::Sample(a) => spec::run_sample(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
