use std::path::PathBuf;

use anyhow::Result;
use clap::Subcommand;
use mshap::experiments::{run_experiment, write_results, ExperimentConfig, ExperimentName};

use crate::spec::overlay;
use crate::Common;

#[derive(Subcommand, Debug)]
pub enum ExperimentCommand {
    /// Run one experiment and write summary.csv, attributions.csv,
    /// errors.csv and config.json.
    Run {
        name: String,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        n_points: Option<usize>,
    },
    /// Print the registered experiment names.
    List,
}

struct Overrides {
    samples: Option<usize>,
    permutations: Option<usize>,
    alpha: Option<f64>,
    n_points: Option<usize>,
}

pub fn run(cmd: ExperimentCommand) -> Result<String> {
    let ExperimentCommand::Run { name, common, samples, permutations, alpha, n_points } = cmd else {
        let names: Vec<&str> = ExperimentName::ALL.iter().map(|e| e.name()).collect();
        return Ok(names.join("\n"));
    };
    let name: ExperimentName = name.parse()?;
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(name),
    };
    cfg.name = name;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let flags = Overrides { samples, permutations, alpha, n_points };
    overlay!(cfg, flags; samples, permutations, alpha, n_points);
    let out = common
        .out
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results").join(name.name()));
    let result = run_experiment(&cfg)?;
    write_results(&result, &out)?;
    let skipped: usize = result.records.iter().filter(|r| r.outcome.is_err()).count();
    Ok(format!(
        "{}: {} settings, {} records ({} skipped) in {:.1}s -> {}",
        name,
        result.settings.len(),
        result.records.len(),
        skipped,
        result.runtime_secs,
        out.display()
    ))
}
