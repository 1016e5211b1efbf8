//! Perturbed models and empirical checks of explanation robustness.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::manifold::{Density, Manifold};
use crate::model::Model;
use crate::rng::RngStream;
use crate::values::{Pmf, ValueFunction};

/// Off-manifold perturbations of a base model `f` with manifold `𝒵`.
#[derive(Clone)]
pub enum PerturbationSpec {
    /// `f(x) + δ·x_feature·1(x ∉ 𝒵)`.
    Regression { delta: f64, feature: usize },
    /// `f(x)·1(x ∈ 𝒵) + 1((1 − δ)·x_feature > threshold)·1(x ∉ 𝒵)`.
    Classifier { delta: f64, feature: usize, threshold: f64 },
    /// `f(x)·1(x ∈ 𝒵) + 1(x_column > 0)·1(x ∉ 𝒵)`.
    Gate { column: usize },
    /// `f(x) + K·1(x ∉ 𝒵)`.
    OffManifoldK { k: f64 },
    /// `f(x) + δ·c(x) / max(p(x), floor)`; the manifold is ignored.
    DensityScaled {
        delta: f64,
        density: Arc<dyn Density>,
        shape: Arc<dyn Model>,
        floor: f64,
    },
}

impl fmt::Debug for PerturbationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationSpec::Regression { delta, feature } => write!(f, "Regression(delta={delta}, feature={feature})"),
            PerturbationSpec::Classifier { delta, feature, threshold } => {
                write!(f, "Classifier(delta={delta}, feature={feature}, threshold={threshold})")
            }
            PerturbationSpec::Gate { column } => write!(f, "Gate(column={column})"),
            PerturbationSpec::OffManifoldK { k } => write!(f, "OffManifoldK(K={k})"),
            PerturbationSpec::DensityScaled { delta, floor, .. } => write!(f, "DensityScaled(delta={delta}, floor={floor})"),
        }
    }
}

/// A base model altered according to a [`PerturbationSpec`].
#[derive(Clone)]
pub struct PerturbedModel {
    base: Arc<dyn Model>,
    manifold: Arc<dyn Manifold>,
    spec: PerturbationSpec,
}

impl fmt::Debug for PerturbedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbedModel").field("spec", &self.spec).finish_non_exhaustive()
    }
}

pub fn build_perturbed(
    base: Arc<dyn Model>,
    manifold: Arc<dyn Manifold>,
    spec: PerturbationSpec,
) -> Result<PerturbedModel> {
    let finite = |v: f64, name: &str| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("perturbation parameter {name} must be finite, got {v}")))
        }
    };
    match &spec {
        PerturbationSpec::Regression { delta, .. } => finite(*delta, "delta")?,
        PerturbationSpec::Classifier { delta, threshold, .. } => {
            finite(*delta, "delta")?;
            finite(*threshold, "threshold")?;
        }
        PerturbationSpec::Gate { .. } => {}
        PerturbationSpec::OffManifoldK { k } => finite(*k, "K")?,
        PerturbationSpec::DensityScaled { delta, floor, .. } => {
            finite(*delta, "delta")?;
            if !(floor.is_finite() && *floor > 0.0) {
                return Err(Error::Domain(format!("density floor must be positive, got {floor}")));
            }
        }
    }
    Ok(PerturbedModel { base, manifold, spec })
}

impl PerturbedModel {
    pub fn spec(&self) -> &PerturbationSpec {
        &self.spec
    }
}

impl Model for PerturbedModel {
    fn eval(&self, x: &[f64]) -> f64 {
        match &self.spec {
            PerturbationSpec::Regression { delta, feature } => {
                let f = self.base.eval(x);
                if self.manifold.contains(x) {
                    f
                } else {
                    f + delta * x[*feature]
                }
            }
            PerturbationSpec::Classifier { delta, feature, threshold } => {
                if self.manifold.contains(x) {
                    self.base.eval(x)
                } else if (1.0 - delta) * x[*feature] > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
            PerturbationSpec::Gate { column } => {
                if self.manifold.contains(x) {
                    self.base.eval(x)
                } else if x[*column] > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            PerturbationSpec::OffManifoldK { k } => {
                let f = self.base.eval(x);
                if self.manifold.contains(x) {
                    f
                } else {
                    f + k
                }
            }
            PerturbationSpec::DensityScaled { delta, density, shape, floor } => {
                self.base.eval(x) + delta * shape.eval(x) / density.density(x).max(*floor)
            }
        }
    }
}

pub type ValueFactory<'a> = dyn Fn(Arc<dyn Model>) -> Result<Arc<dyn ValueFunction>> + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub perturbation: usize,
    pub coalition: Coalition,
    pub v1: f64,
    pub v2: f64,
    pub se1: f64,
    pub se2: f64,
    pub absdiff: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub rows: Vec<RobustnessRow>,
    /// Probe-estimated model gap per perturbation (a lower bound on the true
    /// supremum).
    pub delta_hat: Vec<f64>,
    pub t: f64,
    pub n_probes: usize,
    pub x: Vec<f64>,
    pub coalitions: Vec<Coalition>,
}

impl RobustnessReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn max_absdiff(&self) -> f64 {
        self.rows.iter().map(|r| r.absdiff).fold(0.0, f64::max)
    }

    pub fn n_violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    /// Columns: `coalition` (bit string), `v1`, `v2`, `absdiff`, `bound`, `pass`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let d = self.x.len();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["coalition", "v1", "v2", "absdiff", "bound", "pass"])
            .map_err(|e| Error::csv(path, e))?;
        for r in &self.rows {
            w.write_record([
                r.coalition.to_bitstring(d),
                r.v1.to_string(),
                r.v2.to_string(),
                r.absdiff.to_string(),
                r.bound.to_string(),
                r.pass.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// How a difference is compared against its bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Multiplier `T` on the model gap.
    pub t: f64,
    /// Standard errors of slack added to the bound.
    pub se_slack: f64,
}

fn compare(
    vf1: &dyn ValueFunction,
    vf2: &dyn ValueFunction,
    x: &[f64],
    coalitions: &[Coalition],
    rng: &RngStream,
    perturbation: usize,
    bound: f64,
    slack: f64,
) -> Result<Vec<RobustnessRow>> {
    coalitions
        .par_iter()
        .map(|&s| {
            let a = vf1.value(s, x, &mut rng.clone())?;
            let b = vf2.value(s, x, &mut rng.clone())?;
            let absdiff = (a.value - b.value).abs();
            let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
            Ok(RobustnessRow {
                perturbation,
                coalition: s,
                v1: a.value,
                v2: b.value,
                se1: a.std_error,
                se2: b.std_error,
                absdiff,
                bound,
                pass: absdiff <= bound + slack * se,
            })
        })
        .collect()
}

fn check_coalitions(coalitions: &[Coalition], d: usize) -> Result<()> {
    if coalitions.is_empty() {
        return Err(Error::Domain("no coalitions to check".into()));
    }
    coalitions.iter().try_for_each(|s| s.check_within(d))
}

/// Compare `v(f₁)` and `v(f₂)` on each coalition against `T·δ̂`, where `δ̂`
/// is the largest `|f₁ − f₂|` over the probes lying in `𝒵′`. Both value
/// functions run on the same stream.
#[allow(clippy::too_many_arguments)]
pub fn check_subspace_robustness(
    factory: &ValueFactory<'_>,
    f1: Arc<dyn Model>,
    f2: Arc<dyn Model>,
    subspace: &dyn Manifold,
    probes: &Dataset,
    coalitions: &[Coalition],
    x: &[f64],
    tolerance: Tolerance,
    rng: &RngStream,
) -> Result<RobustnessReport> {
    check_coalitions(coalitions, x.len())?;
    let inside: Vec<&[f64]> = probes.rows().filter(|p| subspace.contains(p)).collect();
    if inside.is_empty() {
        return Err(Error::Domain("probe set has no points in the subspace".into()));
    }
    let delta_hat = inside.iter().map(|p| (f1.eval(p) - f2.eval(p)).abs()).fold(0.0, f64::max);
    let vf1 = factory(f1)?;
    let vf2 = factory(f2)?;
    let bound = tolerance.t * delta_hat;
    let rows = compare(vf1.as_ref(), vf2.as_ref(), x, coalitions, rng, 0, bound, tolerance.se_slack)?;
    Ok(RobustnessReport {
        rows,
        delta_hat: vec![delta_hat],
        t: tolerance.t,
        n_probes: inside.len(),
        x: x.to_vec(),
        coalitions: coalitions.to_vec(),
    })
}

/// Compare `v(f₁)` with `v(f₂)` for every `f₂` in a family built so that
/// `max_x |f₁ − f₂|·p(x) ≤ δ`. The bound is `T·δ` with `T = 1/ε`; the
/// density-weighted gap over the probes is reported as `δ̂` for each member.
#[allow(clippy::too_many_arguments)]
pub fn check_t_robustness(
    factory: &ValueFactory<'_>,
    f1: Arc<dyn Model>,
    family: &[Arc<dyn Model>],
    delta: f64,
    epsilon: f64,
    density: &dyn Density,
    probes: &Dataset,
    coalitions: &[Coalition],
    x: &[f64],
    se_slack: f64,
    rng: &RngStream,
) -> Result<RobustnessReport> {
    check_coalitions(coalitions, x.len())?;
    if probes.n_rows() == 0 {
        return Err(Error::Domain("probe set is empty".into()));
    }
    if !(epsilon > 0.0 && delta >= 0.0) {
        return Err(Error::Domain(format!("need epsilon > 0 and delta >= 0, got {epsilon}, {delta}")));
    }
    let t = 1.0 / epsilon;
    let vf1 = factory(f1.clone())?;
    let mut rows = Vec::new();
    let mut delta_hat = Vec::with_capacity(family.len());
    for (k, f2) in family.iter().enumerate() {
        let gap = probes
            .rows()
            .map(|p| (f1.eval(p) - f2.eval(p)).abs() * density.density(p))
            .fold(0.0, f64::max);
        delta_hat.push(gap);
        let vf2 = factory(f2.clone())?;
        rows.extend(compare(vf1.as_ref(), vf2.as_ref(), x, coalitions, rng, k, t * delta, se_slack)?);
    }
    Ok(RobustnessReport {
        rows,
        delta_hat,
        t,
        n_probes: probes.n_rows(),
        x: x.to_vec(),
        coalitions: coalitions.to_vec(),
    })
}

/// `½ Σ |p − q|` over a shared enumeration of outcomes.
pub fn tv_distance_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension { expected: p.len(), got: q.len() });
    }
    for (name, v) in [("p", p), ("q", q)] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-9 || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Domain(format!("{name} is not a probability vector (sum {total})")));
        }
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// [`tv_distance_discrete`] on two pmfs that must list the same points.
pub fn tv_distance_pmf(p: &Pmf, q: &Pmf) -> Result<f64> {
    if p.len() != q.len() || p.iter().zip(q).any(|(a, b)| a.0 != b.0) {
        return Err(Error::Domain("pmfs are enumerated over different supports".into()));
    }
    let pv: Vec<f64> = p.iter().map(|a| a.1).collect();
    let qv: Vec<f64> = q.iter().map(|a| a.1).collect();
    tv_distance_discrete(&pv, &qv)
}
