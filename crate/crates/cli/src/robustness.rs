use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::{Args, ValueEnum};
use mshap::manifold::{threshold_for_mass, DensityManifold, FullSpace};
use mshap::rng::tag;
use mshap::robustness::{
    build_perturbed, check_subspace_robustness, check_t_robustness, PerturbationSpec, RobustnessReport, Tolerance,
    ValueFactory,
};
use mshap::sampler::ObservationalMarginal;
use mshap::values::{ManifoldValue, MonteCarloValue};
use mshap::{model, Coalition, CoalitionSampler, Density, Error, Manifold, Method, Model, RngStream, RowSampler, ValueFunction};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::spec::{create_dir, load_config, overlay, parse_scm, write_json};
use crate::Common;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `f + K·1(x ∉ 𝒵)` against `f`, bound `T·δ̂` on the manifold.
    #[value(name = "off-manifold-k", alias = "off-manifold-K")]
    OffManifoldK,
    /// `f + δ·cos(w·x + b)/p(x)` for random `w, b`, bound `δ/ε`.
    DensityScaled,
}

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Off-manifold offset.
    #[arg(long, alias = "K")]
    k: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Density threshold for the density-scaled family.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n_perturbations: Option<usize>,
    /// ms, is or manifold.
    #[arg(long)]
    method: Option<Method>,
    /// Built-in SCM name.
    #[arg(long)]
    scm: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// Mass of the manifold for the off-manifold-k family.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated explained point (default: the origin).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    point: Option<Vec<f64>>,
    #[arg(long)]
    probes: Option<usize>,
    /// Standard errors of slack in the pass test.
    #[arg(long)]
    se_slack: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub n_perturbations: Option<usize>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub scm: Option<String>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub probes: Option<usize>,
    #[serde(default)]
    pub se_slack: Option<f64>,
}

pub fn run(args: RobustnessArgs) -> Result<String> {
    let mut cfg: RobustnessConfig = load_config(args.common.config.as_deref())?;
    if let Some(seed) = args.common.seed {
        cfg.seed = Some(seed);
    }
    overlay!(cfg, args; family, k, delta, epsilon, n_perturbations, method, scm, rho, alpha, samples, point, probes, se_slack);
    let seed = *cfg.seed.get_or_insert(0);
    let family = *cfg.family.get_or_insert(Family::OffManifoldK);
    let method = *cfg.method.get_or_insert(Method::Manifold);
    let scm_name = cfg.scm.get_or_insert_with(|| "dag_rho".into()).clone();
    let rho = *cfg.rho.get_or_insert(0.85);
    let m = *cfg.samples.get_or_insert(2000);
    let n_probes = *cfg.probes.get_or_insert(2000);
    let se_slack = *cfg.se_slack.get_or_insert(3.0);
    if !matches!(method, Method::Ms | Method::Is | Method::Manifold) {
        return Err(Error::Config(format!("robustness supports methods ms, is and manifold, not {method}")).into());
    }

    let scm = Arc::new(parse_scm(&format!("{scm_name}:{rho}"))?);
    let d = scm.n_features();
    let x = cfg.point.get_or_insert_with(|| vec![0.0; d]).clone();
    if x.len() != d {
        return Err(Error::Dimension { expected: d, got: x.len() }.into());
    }
    let density: Arc<dyn Density> = Arc::new(scm.density()?);
    let root = RngStream::new(seed);
    let calibration = Arc::new(scm.sample_observational(10_000, &mut root.substream(tag::CALIBRATION, 0, 0))?);
    let probes = scm.sample_observational(n_probes, &mut root.substream(tag::PROBES, 0, 0))?;
    let marginal: Arc<dyn CoalitionSampler> = Arc::new(ObservationalMarginal::new(scm.clone()));
    let f1 = scm.ground_truth_model()?;
    let coalitions: Vec<Coalition> =
        if d <= 12 { (0..1u64 << d).map(Coalition::from_bits).collect() } else { vec![Coalition::EMPTY] };
    let values_rng = root.substream(tag::VALUES, 0, 0);

    let factory_for = |z: Arc<dyn Manifold>| {
        let marginal = marginal.clone();
        let rows: Arc<dyn CoalitionSampler> = Arc::new(RowSampler::new(calibration.clone()));
        move |f: Arc<dyn Model>| -> mshap::Result<Arc<dyn ValueFunction>> {
            Ok(match method {
                Method::Ms => Arc::new(MonteCarloValue::new(f, rows.clone(), m)?),
                Method::Is => Arc::new(MonteCarloValue::new(f, marginal.clone(), m)?),
                _ => Arc::new(ManifoldValue::new(f, z.clone(), marginal.clone(), m)?),
            })
        }
    };

    let report: RobustnessReport = match family {
        Family::OffManifoldK => {
            let k = *cfg.k.get_or_insert(100.0);
            let alpha = *cfg.alpha.get_or_insert(0.9);
            let eps = threshold_for_mass(density.as_ref(), &calibration, alpha)?;
            let z: Arc<dyn Manifold> = Arc::new(DensityManifold::new(density.clone(), eps)?);
            if !z.contains(&x) {
                return Err(Error::OutsideManifold.into());
            }
            let f2: Arc<dyn Model> = Arc::new(build_perturbed(f1.clone(), z.clone(), PerturbationSpec::OffManifoldK { k })?);
            let factory = factory_for(z.clone());
            check_subspace_robustness(
                &factory as &ValueFactory<'_>,
                f1,
                f2,
                z.as_ref(),
                &probes,
                &coalitions,
                &x,
                Tolerance { t: 1.0, se_slack },
                &values_rng,
            )?
        }
        Family::DensityScaled => {
            let delta = *cfg.delta.get_or_insert(1e-2);
            let eps = *cfg.epsilon.get_or_insert(1e-1);
            let n = *cfg.n_perturbations.get_or_insert(20);
            let z: Arc<dyn Manifold> = Arc::new(DensityManifold::new(density.clone(), eps)?);
            if method == Method::Manifold && !z.contains(&x) {
                return Err(Error::OutsideManifold.into());
            }
            let mut r = root.substream(tag::PERTURBATIONS, 0, 0);
            let family: Vec<Arc<dyn Model>> = (0..n)
                .map(|_| {
                    let w: Vec<f64> = (0..d).map(|_| r.gen_range(-3.0..3.0)).collect();
                    let b = r.gen_range(0.0..std::f64::consts::TAU);
                    let shape = model(move |x: &[f64]| (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b).cos());
                    let spec = PerturbationSpec::DensityScaled { delta, density: density.clone(), shape, floor: 1e-12 };
                    Ok(Arc::new(build_perturbed(f1.clone(), Arc::new(FullSpace), spec)?) as Arc<dyn Model>)
                })
                .collect::<mshap::Result<_>>()?;
            let factory = factory_for(z);
            check_t_robustness(
                &factory as &ValueFactory<'_>,
                f1,
                &family,
                delta,
                eps,
                density.as_ref(),
                &probes,
                &coalitions,
                &x,
                se_slack,
                &values_rng,
            )?
        }
    };

    let out = args.common.out.unwrap_or_else(|| PathBuf::from("results/robustness"));
    create_dir(&out)?;
    report.write_csv(out.join("report.csv"))?;
    write_json(&cfg, &out.join("config.json"))?;
    Ok(format!(
        "robustness: {} rows, {} violations, max |v1 - v2| {:.4e} (bound {:.4e}) -> {}",
        report.rows.len(),
        report.n_violations(),
        report.max_absdiff(),
        report.rows.iter().map(|r| r.bound).fold(0.0, f64::max),
        out.display()
    ))
}
