//! Model specs, config loading and the `sample` subcommand.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use mshap::model::TabulatedModel;
use mshap::rng::tag;
use mshap::scm::{build_named, SCM_NAMES};
use mshap::{load_dataset_csv, write_dataset_csv, Dataset, Error, Model, RngStream, Scm};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Parse `scm:<name>[:<rho>[:<d>]]`.
pub fn parse_scm(spec: &str) -> Result<Scm> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default();
    let num = |s: Option<&str>, what: &str| -> Result<Option<f64>> {
        s.map(|t| t.parse::<f64>().map_err(|_| Error::Config(format!("bad {what} {t:?} in SCM spec {spec:?}"))))
            .transpose()
            .map_err(Into::into)
    };
    let rho = num(parts.next(), "rho")?;
    let d = num(parts.next(), "dimension")?.map(|v| v as usize);
    if parts.next().is_some() {
        return Err(Error::Config(format!("SCM spec {spec:?} has too many fields; expected <name>[:<rho>[:<d>]]")).into());
    }
    Ok(build_named(name, rho, d)?)
}

/// A model from `scm:<name>[:<rho>[:<d>]]` (the SCM's noise-free output
/// mechanism) or `table:<csv>` (nearest-neighbour lookup, output in the last
/// column).
pub fn parse_model(spec: &str) -> Result<(Arc<dyn Model>, usize)> {
    if let Some(rest) = spec.strip_prefix("scm:") {
        let scm = parse_scm(rest)?;
        return Ok((scm.ground_truth_model()?, scm.n_features()));
    }
    if let Some(path) = spec.strip_prefix("table:") {
        let data = load_dataset_csv(path, true).with_context(|| format!("loading model table {path}"))?;
        let d = data.dim();
        return Ok((Arc::new(TabulatedModel::new(&data)?), d));
    }
    Err(Error::Config(format!(
        "unknown model spec {spec:?}; expected scm:<name>[:<rho>[:<d>]] (one of {}) or table:<csv>",
        SCM_NAMES.join(", ")
    ))
    .into())
}

/// Read a JSON config, or the default when no path is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("reading config {}", path.display()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Fill `cfg.field` from the flag when the flag was given.
macro_rules! overlay {
    ($cfg:expr, $args:expr; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $args.$field.clone() {
            $cfg.$field = Some(v);
        })*
    };
}
pub(crate) use overlay;

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Built-in SCM, `<name>[:<rho>[:<d>]]`.
    #[arg(long)]
    scm: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the SCM output node (with its noise) as a last `target` column.
    #[arg(long)]
    with_output: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn run_sample(args: SampleArgs) -> Result<String> {
    let scm = parse_scm(&args.scm)?;
    let mut rng = RngStream::new(args.seed).substream(tag::EVAL_POINTS, 0, 0);
    let mut data = scm.sample_observational(args.n, &mut rng)?;
    if args.with_output {
        if data.target().is_none() {
            return Err(Error::Config(format!("SCM {} has no output node", args.scm)).into());
        }
    } else {
        data = Dataset::from_flat(data.as_flat().to_vec(), data.dim(), data.feature_names().to_vec())?;
    }
    write_dataset_csv(&data, &args.out)?;
    Ok(format!("sample: {} rows of {} -> {}", args.n, args.scm, args.out.display()))
}
