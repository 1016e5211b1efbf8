use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use mshap::manifold::{fit_kde, read_manifold_file, Bandwidth, Manifold};
use mshap::rng::tag;
use mshap::robustness::{build_perturbed, PerturbationSpec};
use mshap::sampler::GaussianConditionalSampler;
use mshap::values::{fit_ces_surrogate, JointBaselineValue, ManifoldValue, MonteCarloValue, RandomJointBaselineValue, SurrogateParams};
use mshap::{
    exact_shapley, load_dataset_csv, manifold_permutation_shapley, normalize_l1, permutation_shapley, Attribution, CoalitionSampler,
    EngineKind, Error, Method, MultivariateNormal, RngStream, RowSampler, ValueFunction,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::fit_mass;
use crate::spec::{create_dir, load_config, overlay, parse_model, write_json};
use crate::Common;

/// Largest dimension the default engine enumerates exactly.
const EXACT_MAX_D: usize = 12;

#[derive(Args, Debug)]
pub struct AttributeArgs {
    #[command(flatten)]
    common: Common,
    /// Rows to explain.
    #[arg(long)]
    data: Option<String>,
    /// Rows the value functions sample from (default: --data).
    #[arg(long)]
    background: Option<String>,
    /// `scm:<name>[:<rho>[:<d>]]` or `table:<csv>`.
    #[arg(long)]
    model: Option<String>,
    /// ms, is, ces-analytic, ces-surrogate, jb, rjb or manifold.
    #[arg(long)]
    method: Option<Method>,
    /// exact, permutation or manifold-permutation.
    #[arg(long)]
    engine: Option<EngineKind>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    /// Manifold file written by `mshap manifold`; otherwise a mass manifold
    /// is fitted on the background.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Replace the model off the manifold by `1(x_column > 0)`.
    #[arg(long)]
    gate_column: Option<usize>,
    /// The last column of --data and --background is a target and is ignored.
    #[arg(long)]
    data_has_target: bool,
}

/// Settings of one `attribute` run; the resolved form is echoed to
/// `config.json` and can be fed back with `--config`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default)]
    pub background: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub engine: Option<EngineKind>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub permutations: Option<usize>,
    #[serde(default)]
    pub manifold: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub gate_column: Option<usize>,
    #[serde(default)]
    pub data_has_target: Option<bool>,
    #[serde(default)]
    pub surrogate: Option<SurrogateParams>,
}

fn required<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Config(format!("{flag} is required (flag or config)")).into())
}

enum Prepared {
    Value(Arc<dyn ValueFunction>),
    ManifoldPermutation,
}

struct Row {
    outcome: Option<Attribution>,
    outside: bool,
}

pub fn run(args: AttributeArgs) -> Result<String> {
    let mut cfg: AttributeConfig = load_config(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        cfg.seed = Some(seed);
    }
    overlay!(cfg, args; data, background, model, method, engine, samples, permutations, manifold, alpha, gate_column);
    if args.data_has_target {
        cfg.data_has_target = Some(true);
    }

    let has_target = *cfg.data_has_target.get_or_insert(false);
    let seed = *cfg.seed.get_or_insert(0);
    let data_path = required(&cfg.data, "--data")?.to_string();
    let data = load_dataset_csv(&data_path, has_target)?;
    let background = match &cfg.background {
        Some(p) => load_dataset_csv(p, has_target)?,
        None => {
            cfg.background = Some(data_path.clone());
            data.clone()
        }
    };
    if background.dim() != data.dim() {
        return Err(Error::Dimension { expected: data.dim(), got: background.dim() }).context("background columns");
    }
    let d = data.dim();
    let (mut model, model_d) = parse_model(required(&cfg.model, "--model")?)?;
    if model_d != d {
        return Err(Error::Dimension { expected: d, got: model_d }).context("model dimension vs data columns");
    }
    let method = *cfg.method.get_or_insert(Method::Manifold);
    let engine = *cfg.engine.get_or_insert(if d <= EXACT_MAX_D { EngineKind::Exact } else { EngineKind::Permutation });
    let m = *cfg.samples.get_or_insert(500);
    let n_perm = *cfg.permutations.get_or_insert(500);
    let alpha = *cfg.alpha.get_or_insert(0.99);
    if engine == EngineKind::ManifoldPermutation && method != Method::Manifold {
        return Err(Error::Config(format!("the manifold-permutation engine only runs method manifold, not {method}")).into());
    }
    if let Some(c) = cfg.gate_column {
        if c >= d {
            return Err(Error::Config(format!("--gate-column {c} is out of range for {d} features")).into());
        }
    }

    let root = RngStream::new(seed);
    let manifold: Option<Arc<dyn Manifold>> = match (&cfg.manifold, method == Method::Manifold || cfg.gate_column.is_some()) {
        (Some(path), _) => {
            let (file, names) = read_manifold_file(path)?;
            if names.len() != d {
                return Err(Error::Dimension { expected: d, got: names.len() }).context("manifold file columns");
            }
            Some(file.into_manifold()?)
        }
        (None, true) => Some(fit_mass(&background, alpha, &mut root.substream(tag::CALIBRATION, 0, 0))?.into_manifold()?),
        (None, false) => None,
    };
    if let (Some(column), Some(z)) = (cfg.gate_column, &manifold) {
        model = Arc::new(build_perturbed(model, z.clone(), PerturbationSpec::Gate { column })?);
    }

    let background = Arc::new(background);
    let rows: Arc<dyn CoalitionSampler> = Arc::new(RowSampler::new(background.clone()));
    let kde = || -> Result<Arc<dyn mshap::Density>> { Ok(Arc::new(fit_kde(&background, &Bandwidth::Scott)?)) };
    let prepared = match method {
        Method::Ms | Method::Is => Prepared::Value(Arc::new(MonteCarloValue::new(model.clone(), rows.clone(), m)?)),
        Method::CesAnalytic => {
            let mvn = MultivariateNormal::new(background.column_means(), background.covariance())
                .context("fitting a Gaussian to the background")?;
            Prepared::Value(Arc::new(MonteCarloValue::new(
                model.clone(),
                Arc::new(GaussianConditionalSampler::new(mvn)),
                m,
            )?))
        }
        Method::CesSurrogate => {
            let params = cfg.surrogate.get_or_insert_with(SurrogateParams::default).clone();
            Prepared::Value(Arc::new(fit_ces_surrogate(
                model.clone(),
                &background,
                &params,
                &mut root.substream(tag::FIT, 0, 1),
            )?))
        }
        Method::Jb => Prepared::Value(Arc::new(JointBaselineValue::new(model.clone(), kde()?, background.column_medians()))),
        Method::Rjb => Prepared::Value(Arc::new(RandomJointBaselineValue::new(model.clone(), kde()?, rows.clone(), m)?)),
        Method::Manifold if engine == EngineKind::ManifoldPermutation => Prepared::ManifoldPermutation,
        Method::Manifold => {
            let z = manifold.clone().expect("manifold is built for the manifold method");
            Prepared::Value(Arc::new(ManifoldValue::new(model.clone(), z, rows.clone(), m)?))
        }
    };

    let results: Vec<Row> = (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = data.row(i);
            let rng = root.substream(tag::VALUES, i as u64, 0);
            let outside = manifold.as_ref().is_some_and(|z| !z.contains(x));
            if outside && method == Method::Manifold {
                return Ok(Row { outcome: None, outside });
            }
            let a = match &prepared {
                Prepared::Value(vf) => match engine {
                    EngineKind::Exact => exact_shapley(vf.as_ref(), x, &rng),
                    _ => permutation_shapley(vf.as_ref(), x, n_perm, &rng),
                },
                Prepared::ManifoldPermutation => manifold_permutation_shapley(
                    model.as_ref(),
                    manifold.as_deref().expect("manifold is built for the manifold method"),
                    rows.as_ref(),
                    x,
                    n_perm,
                    &rng,
                ),
            }
            .map_err(|e| e.at_point(i))?;
            Ok(Row { outcome: Some(a), outside })
        })
        .collect::<mshap::Result<_>>()?;

    let out = args.common.out.unwrap_or_else(|| PathBuf::from("results/attribute"));
    create_dir(&out)?;
    write_attributions(&out.join("attributions.csv"), method, data.feature_names(), &results)?;
    write_json(&cfg, &out.join("config.json"))?;

    let outside: Vec<usize> = results.iter().enumerate().filter(|(_, r)| r.outside).map(|(i, _)| i).collect();
    if !outside.is_empty() {
        let shown: Vec<String> = outside.iter().take(10).map(|i| i.to_string()).collect();
        let more = if outside.len() > 10 { ", ..." } else { "" };
        let what = if method == Method::Manifold { "skipped" } else { "attributed anyway" };
        eprintln!(
            "warning: {} of {} rows lie outside the manifold ({what}): {}{more}",
            outside.len(),
            data.n_rows(),
            shown.join(", ")
        );
    }
    Ok(format!(
        "attribute: {} rows x {} features, method {method}, engine {engine}, {} outside the manifold -> {}",
        data.n_rows(),
        d,
        outside.len(),
        out.display()
    ))
}

fn write_attributions(path: &Path, method: Method, names: &[String], rows: &[Row]) -> Result<()> {
    let csv_err = |e| Error::csv(path, e);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["row", "method", "feature", "phi", "phi_normalized", "std_error", "status"]).map_err(csv_err)?;
    for (i, r) in rows.iter().enumerate() {
        let status = match (&r.outcome, r.outside) {
            (None, _) => "skipped_outside_manifold",
            (Some(_), true) => "outside_manifold",
            (Some(_), false) => "ok",
        };
        let normalized = r.outcome.as_ref().map(normalize_l1);
        for (j, name) in names.iter().enumerate() {
            let (phi, norm, se) = match (&r.outcome, &normalized) {
                (Some(a), Some(n)) => (
                    a.phi[j].to_string(),
                    n.phi[j].to_string(),
                    a.std_errors.as_ref().map(|s| s[j].to_string()).unwrap_or_default(),
                ),
                _ => Default::default(),
            };
            w.write_record([i.to_string(), method.name().to_string(), name.clone(), phi, norm, se, status.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
