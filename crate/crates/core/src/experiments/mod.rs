//! Seeded end-to-end studies on synthetic SCMs.
//!
//! Each run samples a calibration set and the explained points from an SCM,
//! builds the manifold from oracle (or KDE) densities, and attributes every
//! point with each requested method plus ground-truth interventional values
//! of the unperturbed model (`is-gt`). Streams are keyed by
//! `(seed, point)`, so results do not depend on the worker count, and the
//! same point gets the same draws under every perturbation size.

mod config;
mod result;

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

pub use config::{DensityBackend, ExperimentConfig, ExperimentName};
pub use result::{write_results, ErrorRow, ExperimentResult, PointRecord, Quartiles, Skip, SummaryRow, GROUND_TRUTH};

use crate::attribution::Attribution;
use crate::dataset::Dataset;
use crate::engine::{exact_shapley_with, manifold_permutation_shapley, permutation_shapley, EngineKind};
use crate::error::{Error, Result};

use crate::manifold::{fit_kde, threshold_for_mass, Bandwidth, Density, DensityManifold, Manifold};
use crate::model::Model;
use crate::rng::{tag, RngStream};
use crate::robustness::{build_perturbed, PerturbationSpec};
use crate::sampler::{CoalitionSampler, GaussianConditionalSampler, ObservationalMarginal, RowSampler};
use crate::scm::{self, Scm};
use crate::values::{
    fit_ces_surrogate, JointBaselineValue, ManifoldValue, Method, MonteCarloValue, RandomJointBaselineValue,
    ValueFunction,
};

/// Points fitted by the KDE backend.
const KDE_POINTS: usize = 2000;

/// Data shared by every setting that uses the same SCM.
struct Problem {
    scm: Arc<Scm>,
    calibration: Arc<Dataset>,
    points: Dataset,
    density: Arc<dyn Density>,
    data_key: u64,
}

impl Problem {
    fn new(cfg: &ExperimentConfig, scm: Scm, data_key: u64) -> Result<Self> {
        let base = RngStream::new(cfg.seed);
        let calibration = scm.sample_observational(cfg.n_calibration(), &mut base.substream(tag::CALIBRATION, data_key, 0))?;
        let points = scm.sample_observational(cfg.n_points(), &mut base.substream(tag::EVAL_POINTS, data_key, 0))?;
        let density: Arc<dyn Density> = match cfg.density() {
            DensityBackend::Oracle => match scm.density() {
                Ok(d) => Arc::new(d),
                Err(e) => match scm.joint_gaussian() {
                    Some(g) => Arc::new(g.clone()),
                    None => return Err(e),
                },
            },
            DensityBackend::Kde => {
                let train = scm.sample_observational(KDE_POINTS, &mut base.substream(tag::FIT, data_key, 0))?;
                Arc::new(fit_kde(&train, &Bandwidth::Scott)?)
            }
        };
        Ok(Problem {
            scm: Arc::new(scm),
            calibration: Arc::new(calibration),
            points,
            density,
            data_key,
        })
    }

    /// `𝒟_ε` with `ε` the `(1 − α)` density quantile of the calibration set.
    fn mass_manifold(&self, alpha: f64) -> Result<Arc<dyn Manifold>> {
        let eps = threshold_for_mass(self.density.as_ref(), &self.calibration, alpha)?;
        Ok(Arc::new(DensityManifold::new(self.density.clone(), eps)?))
    }
}

struct Setting {
    label: String,
    model: Arc<dyn Model>,
    truth: Arc<dyn Model>,
    manifold: Arc<dyn Manifold>,
}

enum Prepared {
    Value(Arc<dyn ValueFunction>),
    Manifold(Arc<dyn ValueFunction>),
}

fn attribute_value(cfg: &ExperimentConfig, vf: &dyn ValueFunction, x: &[f64], rng: &RngStream) -> Result<Attribution> {
    if x.len() <= cfg.exact_max_d() {
        exact_shapley_with(vf, x, rng, cfg.exact_max_d())
    } else {
        permutation_shapley(vf, x, cfg.permutations(), rng)
    }
}

fn run_setting(cfg: &ExperimentConfig, problem: &Problem, setting: &Setting) -> Result<Vec<PointRecord>> {
    let m = cfg.samples();
    let marginal: Arc<dyn CoalitionSampler> = Arc::new(ObservationalMarginal::new(problem.scm.clone()));
    let truth_vf: Arc<dyn ValueFunction> = Arc::new(MonteCarloValue::new(setting.truth.clone(), marginal.clone(), m)?);
    let mut prepared: Vec<(Method, Prepared)> = Vec::new();
    for &method in cfg.methods() {
        let p = match method {
            Method::Is => Prepared::Value(Arc::new(MonteCarloValue::new(setting.model.clone(), marginal.clone(), m)?)),
            Method::Ms => Prepared::Value(Arc::new(MonteCarloValue::new(
                setting.model.clone(),
                Arc::new(RowSampler::new(problem.calibration.clone())),
                m,
            )?)),
            Method::CesAnalytic => {
                let mvn = problem.scm.joint_gaussian().ok_or_else(|| {
                    Error::Config("ces-analytic needs an SCM with a joint Gaussian law".into())
                })?;
                Prepared::Value(Arc::new(MonteCarloValue::new(
                    setting.model.clone(),
                    Arc::new(GaussianConditionalSampler::new(mvn.clone())),
                    m,
                )?))
            }
            Method::CesSurrogate => {
                let fit = RngStream::new(cfg.seed).substream(tag::FIT, problem.data_key, 1);
                Prepared::Value(Arc::new(fit_ces_surrogate(
                    setting.model.clone(),
                    &problem.calibration,
                    &cfg.surrogate(),
                    &mut fit.clone(),
                )?))
            }
            Method::Jb => Prepared::Value(Arc::new(JointBaselineValue::new(
                setting.model.clone(),
                problem.density.clone(),
                problem.calibration.column_medians(),
            ))),
            Method::Rjb => Prepared::Value(Arc::new(RandomJointBaselineValue::new(
                setting.model.clone(),
                problem.density.clone(),
                marginal.clone(),
                m,
            )?)),
            Method::Manifold => Prepared::Manifold(Arc::new(ManifoldValue::new(
                setting.model.clone(),
                setting.manifold.clone(),
                marginal.clone(),
                m,
            )?)),
        };
        prepared.push((method, p));
    }
    let base = RngStream::new(cfg.seed);
    let per_point = (0..problem.points.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = problem.points.row(i);
            let rng = base.substream(tag::VALUES, i as u64, 0);
            let record = |method: String, outcome| PointRecord {
                setting: setting.label.clone(),
                point: i,
                method,
                outcome,
            };
            let mut out = Vec::with_capacity(prepared.len() + 1);
            let gt = attribute_value(cfg, truth_vf.as_ref(), x, &rng).map_err(|e| e.at_point(i))?;
            out.push(record(GROUND_TRUTH.to_string(), Ok(gt)));
            for (method, p) in &prepared {
                let outcome = match p {
                    Prepared::Value(vf) => Ok(attribute_value(cfg, vf.as_ref(), x, &rng).map_err(|e| e.at_point(i))?),
                    Prepared::Manifold(vf) => {
                        if !setting.manifold.contains(x) {
                            Err(Skip::OutsideManifold)
                        } else if cfg.manifold_engine() == EngineKind::ManifoldPermutation {
                            Ok(manifold_permutation_shapley(
                                setting.model.as_ref(),
                                setting.manifold.as_ref(),
                                marginal.as_ref(),
                                x,
                                cfg.permutations(),
                                &rng,
                            )
                            .map_err(|e| e.at_point(i))?)
                        } else {
                            Ok(attribute_value(cfg, vf.as_ref(), x, &rng).map_err(|e| e.at_point(i))?)
                        }
                    }
                };
                out.push(record(method.name().to_string(), outcome));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn fmt_setting(key: &str, v: impl std::fmt::Display) -> String {
    format!("{key}={v}")
}

fn finish(
    cfg: ExperimentConfig,
    names: Vec<String>,
    settings: Vec<String>,
    records: Vec<PointRecord>,
    start: Instant,
) -> ExperimentResult {
    ExperimentResult::assemble(cfg, names, settings, records, start.elapsed().as_secs_f64())
}

/// Off-manifold regression perturbation on the correlated DAG:
/// `g_δ = Y + δ·X₂·1(X ∉ 𝒫_α)`, `ρ = 0.85`.
pub fn run_synthetic_dag(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_perturbation(cfg, scm::make_dag_scm(0.85)?, |delta| PerturbationSpec::Regression { delta, feature: 1 })
}

/// Off-manifold classifier perturbation, `ρ = 0.9`, `Y = 1(X₁ > 1/2)`:
/// `g_δ = Y·1(in) + 1((1 − δ)X₁ > 1/2)·1(out)`.
pub fn run_classification_perturbation(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_perturbation(cfg, scm::make_corr_gaussian_2d(0.9)?, |delta| PerturbationSpec::Classifier {
        delta,
        feature: 0,
        threshold: 0.5,
    })
}

fn run_perturbation(
    cfg: &ExperimentConfig,
    scm: Scm,
    spec: impl Fn(f64) -> PerturbationSpec,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let names = scm.feature_names();
    let problem = Problem::new(&cfg, scm, 0)?;
    let manifold = problem.mass_manifold(cfg.alpha())?;
    let truth = problem.scm.ground_truth_model()?;
    let mut settings = Vec::new();
    let mut records = Vec::new();
    for &delta in cfg.deltas.as_deref().unwrap_or(&[]) {
        let model: Arc<dyn Model> = Arc::new(build_perturbed(truth.clone(), manifold.clone(), spec(delta))?);
        let setting = Setting {
            label: fmt_setting("delta", delta),
            model,
            truth: truth.clone(),
            manifold: manifold.clone(),
        };
        records.extend(run_setting(&cfg, &problem, &setting)?);
        settings.push(setting.label);
    }
    Ok(finish(cfg, names, settings, records, start))
}

/// `f = X₁` on bivariate normals of increasing correlation, with `𝒵 = 𝒟_ε`
/// at the `(1 − α)` density quantile.
pub fn run_correlation_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let mut settings = Vec::new();
    let mut records = Vec::new();
    let mut names = Vec::new();
    for (k, &rho) in cfg.rhos.clone().unwrap_or_default().iter().enumerate() {
        let scm = scm::make_dag_scm(rho)?;
        names = scm.feature_names();
        let problem = Problem::new(&cfg, scm, k as u64)?;
        let truth = problem.scm.ground_truth_model()?;
        let setting = Setting {
            label: fmt_setting("rho", rho),
            model: truth.clone(),
            truth,
            manifold: problem.mass_manifold(cfg.alpha())?,
        };
        records.extend(run_setting(&cfg, &problem, &setting)?);
        settings.push(setting.label);
    }
    Ok(finish(cfg, names, settings, records, start))
}

/// `f = X₁` on the sine-wave SCM with `𝒵 = 𝒟_ε` shrinking through the mass
/// levels in `alphas`.
pub fn run_manifold_size_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let scm = scm::make_sine_scm()?;
    let names = scm.feature_names();
    let problem = Problem::new(&cfg, scm, 0)?;
    let truth = problem.scm.ground_truth_model()?;
    let mut settings = Vec::new();
    let mut records = Vec::new();
    for &alpha in cfg.alphas.clone().unwrap_or_default().iter() {
        let setting = Setting {
            label: fmt_setting("alpha", alpha),
            model: truth.clone(),
            truth: truth.clone(),
            manifold: problem.mass_manifold(alpha)?,
        };
        records.extend(run_setting(&cfg, &problem, &setting)?);
        settings.push(setting.label);
    }
    Ok(finish(cfg, names, settings, records, start))
}

/// `f = exp(X₁²/2)` on `𝒩(0, I₂)`, where `f·p` depends on `x₂` only.
pub fn run_rjb_counterexample(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let scm = scm::make_indep_gaussian_2d()?;
    let names = scm.feature_names();
    let problem = Problem::new(&cfg, scm, 0)?;
    let truth = problem.scm.ground_truth_model()?;
    let setting = Setting {
        label: "base".into(),
        model: truth.clone(),
        truth,
        manifold: problem.mass_manifold(cfg.alpha())?,
    };
    let records = run_setting(&cfg, &problem, &setting)?;
    Ok(finish(cfg, names, vec![setting.label], records, start))
}

/// Equicorrelated (`ρ = 0.9`) features in `d` dimensions with
/// `f = X₁ + 10·X₂·1(X ∉ 𝒫_α)`.
pub fn run_dimension_scaling(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = Instant::now();
    let cfg = cfg.resolved()?;
    let mut settings = Vec::new();
    let mut records = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (k, &d) in cfg.dims.clone().unwrap_or_default().iter().enumerate() {
        let scm = scm::make_equicorrelated(d, 0.9)?;
        if scm.n_features() > names.len() {
            names = scm.feature_names();
        }
        let problem = Problem::new(&cfg, scm, k as u64)?;
        let manifold = problem.mass_manifold(cfg.alpha())?;
        let truth = problem.scm.ground_truth_model()?;
        let model: Arc<dyn Model> = Arc::new(build_perturbed(
            truth.clone(),
            manifold.clone(),
            PerturbationSpec::Regression { delta: 10.0, feature: 1 },
        )?);
        let setting = Setting {
            label: fmt_setting("d", d),
            model,
            truth,
            manifold,
        };
        records.extend(run_setting(&cfg, &problem, &setting)?);
        settings.push(setting.label);
    }
    Ok(finish(cfg, names, settings, records, start))
}

/// Run the experiment named in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    match cfg.name {
        ExperimentName::SyntheticDag => run_synthetic_dag(cfg),
        ExperimentName::ClassificationPerturbation => run_classification_perturbation(cfg),
        ExperimentName::CorrelationSweep => run_correlation_sweep(cfg),
        ExperimentName::ManifoldSizeSweep => run_manifold_size_sweep(cfg),
        ExperimentName::RjbCounterexample => run_rjb_counterexample(cfg),
        ExperimentName::DimensionScaling => run_dimension_scaling(cfg),
    }
}
