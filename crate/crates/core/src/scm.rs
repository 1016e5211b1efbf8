//! Markovian structural causal models with observational and `do(·)` sampling.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::MultivariateNormal;
use crate::manifold::Density;
use crate::model::{Model, SharedModel};
use crate::rng::RngStream;

/// Upper bound on node count; sampling uses a fixed stack buffer.
pub const MAX_NODES: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Noise {
    Gaussian { mean: f64, std: f64 },
    Bernoulli { p: f64 },
    Degenerate { value: f64 },
}

impl Noise {
    pub fn standard() -> Self {
        Noise::Gaussian { mean: 0.0, std: 1.0 }
    }

    /// Always one `StandardNormal` draw and one uniform draw, so the stream
    /// position never depends on which nodes are intervened on.
    fn draw(&self, rng: &mut RngStream) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.gen();
        match *self {
            Noise::Gaussian { mean, std } => mean + std * z,
            Noise::Bernoulli { p } => f64::from(u8::from(u < p)),
            Noise::Degenerate { value } => value,
        }
    }

    /// The value used when noise is suppressed.
    fn central(&self) -> f64 {
        match *self {
            Noise::Gaussian { mean, .. } => mean,
            Noise::Bernoulli { p } => p,
            Noise::Degenerate { value } => value,
        }
    }
}

type MeanFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GeneralFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Mechanism {
    /// `value = mean(parents) + noise`.
    Additive(MeanFn),
    /// `value = g(parents, noise)`.
    General(GeneralFn),
}

impl Mechanism {
    pub fn additive<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Mechanism::Additive(Arc::new(f))
    }

    pub fn general<F>(f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Mechanism::General(Arc::new(f))
    }

    /// Exogenous root: the noise itself.
    pub fn root() -> Self {
        Mechanism::additive(|_| 0.0)
    }

    fn apply(&self, parents: &[f64], noise: f64) -> f64 {
        match self {
            Mechanism::Additive(mean) => mean(parents) + noise,
            Mechanism::General(g) => g(parents, noise),
        }
    }
}

#[derive(Clone)]
pub struct ScmNode {
    pub name: String,
    pub parents: Vec<usize>,
    pub mechanism: Mechanism,
    pub noise: Noise,
}

/// Nodes are stored in topological order; a parent index is always smaller
/// than its child's.
#[derive(Clone)]
pub struct Scm {
    nodes: Vec<ScmNode>,
    features: Vec<usize>,
    feature_pos: Vec<Option<usize>>,
    output: Option<usize>,
    gaussian: Option<MultivariateNormal>,
}

/// `do(X_S = x_S)` on feature indices.
#[derive(Clone, Debug, PartialEq)]
pub struct InterventionSpec {
    pub coalition: Coalition,
    /// One value per member of the coalition, in increasing index order.
    pub values: Vec<f64>,
}

impl InterventionSpec {
    pub fn new(coalition: Coalition, values: Vec<f64>) -> Result<Self> {
        if values.len() != coalition.len() {
            return Err(Error::Dimension {
                expected: coalition.len(),
                got: values.len(),
            });
        }
        Ok(InterventionSpec { coalition, values })
    }

    /// Take `x_S` out of a full feature vector.
    pub fn from_point(coalition: Coalition, x: &[f64]) -> Self {
        InterventionSpec {
            coalition,
            values: coalition.iter().map(|j| x[j]).collect(),
        }
    }
}

#[derive(Default)]
pub struct ScmBuilder {
    nodes: Vec<ScmNode>,
    features: Vec<String>,
    output: Option<String>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parents must already be defined, which keeps the graph acyclic.
    pub fn node(mut self, name: &str, parents: &[&str], mechanism: Mechanism, noise: Noise) -> Result<Self> {
        if self.nodes.iter().any(|n| n.name == name) {
            return Err(Error::Domain(format!("duplicate node {name:?}")));
        }
        let parents = parents
            .iter()
            .map(|p| {
                self.nodes
                    .iter()
                    .position(|n| n.name == *p)
                    .ok_or_else(|| Error::Domain(format!("node {name:?} references unknown parent {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.nodes.push(ScmNode {
            name: name.to_string(),
            parents,
            mechanism,
            noise,
        });
        Ok(self)
    }

    pub fn features(mut self, names: &[&str]) -> Self {
        self.features = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn output(mut self, name: &str) -> Self {
        self.output = Some(name.to_string());
        self
    }

    pub fn build(self) -> Result<Scm> {
        if self.nodes.len() > MAX_NODES {
            return Err(Error::Domain(format!("at most {MAX_NODES} nodes are supported")));
        }
        let find = |name: &str| {
            self.nodes
                .iter()
                .position(|n| n.name == name)
                .ok_or_else(|| Error::Domain(format!("unknown node {name:?}")))
        };
        let features = if self.features.is_empty() {
            let out = self.output.as_deref();
            (0..self.nodes.len())
                .filter(|&i| Some(self.nodes[i].name.as_str()) != out)
                .collect()
        } else {
            self.features.iter().map(|f| find(f)).collect::<Result<Vec<_>>>()?
        };
        if features.is_empty() {
            return Err(Error::Domain("SCM needs at least one feature node".into()));
        }
        let output = self.output.as_deref().map(find).transpose()?;
        let mut feature_pos = vec![None; self.nodes.len()];
        for (k, &i) in features.iter().enumerate() {
            feature_pos[i] = Some(k);
        }
        Ok(Scm {
            nodes: self.nodes,
            features,
            feature_pos,
            output,
            gaussian: None,
        })
    }
}

impl Scm {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[ScmNode] {
        &self.nodes
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|&i| self.nodes[i].name.clone()).collect()
    }

    /// Joint law of the features when the SCM is linear-Gaussian.
    pub fn joint_gaussian(&self) -> Option<&MultivariateNormal> {
        self.gaussian.as_ref()
    }

    /// Evaluate every node in order. `fixed` holds `(node, value)` pairs that
    /// replace their mechanisms; noise is drawn for every node regardless.
    pub(crate) fn draw_nodes(&self, fixed: &[(usize, f64)], nodes: &mut [f64], rng: &mut RngStream) {
        let mut parents = [0.0f64; MAX_NODES];
        for (i, node) in self.nodes.iter().enumerate() {
            let noise = node.noise.draw(rng);
            if let Some(&(_, v)) = fixed.iter().find(|(k, _)| *k == i) {
                nodes[i] = v;
                continue;
            }
            for (slot, &p) in parents.iter_mut().zip(&node.parents) {
                *slot = nodes[p];
            }
            nodes[i] = node.mechanism.apply(&parents[..node.parents.len()], noise);
        }
    }

    pub(crate) fn features_into(&self, nodes: &[f64], out: &mut [f64]) {
        for (o, &i) in out.iter_mut().zip(&self.features) {
            *o = nodes[i];
        }
    }

    pub(crate) fn intervention_targets(&self, coalition: Coalition, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        coalition.check_within(self.n_features()).map_err(|_| {
            Error::Domain(format!(
                "intervention on unknown node: coalition {coalition} with {} features",
                self.n_features()
            ))
        })?;
        Ok(coalition.iter().map(|j| (self.features[j], x[j])).collect())
    }

    fn sample_with(&self, fixed: &[(usize, f64)], n: usize, rng: &mut RngStream) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Domain("sample size must be at least 1".into()));
        }
        let d = self.n_features();
        let mut nodes = vec![0.0; self.n_nodes()];
        let mut values = Vec::with_capacity(n * d);
        let mut target = self.output.map(|_| Vec::with_capacity(n));
        let mut row = vec![0.0; d];
        for _ in 0..n {
            self.draw_nodes(fixed, &mut nodes, rng);
            self.features_into(&nodes, &mut row);
            values.extend_from_slice(&row);
            if let (Some(t), Some(o)) = (target.as_mut(), self.output) {
                t.push(nodes[o]);
            }
        }
        let data = Dataset::from_flat(values, d, self.feature_names())?;
        match target {
            Some(t) => data.with_target(t),
            None => Ok(data),
        }
    }

    /// Rows generated by running every mechanism in topological order.
    pub fn sample_observational(&self, n: usize, rng: &mut RngStream) -> Result<Dataset> {
        self.sample_with(&[], n, rng)
    }

    /// Rows under `do(X_S = x_S)`. Intervened nodes hold their values,
    /// descendants see them, everything else keeps its mechanism. Returns
    /// full feature rows; the coalition's columns are constant.
    pub fn sample_interventional(
        &self,
        spec: &InterventionSpec,
        n: usize,
        rng: &mut RngStream,
    ) -> Result<Dataset> {
        let mut x = vec![0.0; self.n_features()];
        spec.coalition.check_within(self.n_features()).map_err(|_| {
            Error::Domain(format!("intervention on unknown node in {}", spec.coalition))
        })?;
        for (j, v) in spec.coalition.iter().zip(&spec.values) {
            x[j] = *v;
        }
        let fixed = self.intervention_targets(spec.coalition, &x)?;
        self.sample_with(&fixed, n, rng)
    }

    /// The output node's mechanism evaluated on features with noise
    /// suppressed. The output's parents must all be features.
    pub fn ground_truth_model(&self) -> Result<SharedModel> {
        let out = self
            .output
            .ok_or_else(|| Error::Config("SCM has no designated output node".into()))?;
        let node = self.nodes[out].clone();
        let parent_features = node
            .parents
            .iter()
            .map(|&p| {
                self.feature_pos[p].ok_or_else(|| {
                    Error::Config(format!(
                        "output parent {:?} is not a feature",
                        self.nodes[p].name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(GroundTruth {
            node,
            parent_features,
        }))
    }

    /// Oracle feature density for SCMs whose feature nodes all have additive
    /// Gaussian noise and feature-only parents.
    pub fn density(&self) -> Result<ScmDensity> {
        for &i in &self.features {
            let node = &self.nodes[i];
            let additive = matches!(node.mechanism, Mechanism::Additive(_));
            let gaussian = matches!(node.noise, Noise::Gaussian { std, .. } if std > 0.0);
            let parents_ok = node.parents.iter().all(|&p| self.feature_pos[p].is_some());
            if !(additive && gaussian && parents_ok) {
                return Err(Error::Config(format!(
                    "no closed-form density: node {:?} is not additive-Gaussian over features",
                    node.name
                )));
            }
        }
        Ok(ScmDensity {
            scm: Arc::new(self.clone()),
        })
    }
}

struct GroundTruth {
    node: ScmNode,
    parent_features: Vec<usize>,
}

impl Model for GroundTruth {
    fn eval(&self, x: &[f64]) -> f64 {
        let mut parents = [0.0f64; MAX_NODES];
        for (slot, &j) in parents.iter_mut().zip(&self.parent_features) {
            *slot = x[j];
        }
        self.node
            .mechanism
            .apply(&parents[..self.parent_features.len()], self.node.noise.central())
    }
}

#[derive(Clone)]
pub struct ScmDensity {
    scm: Arc<Scm>,
}

impl ScmDensity {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let scm = &self.scm;
        let mut parents = [0.0f64; MAX_NODES];
        let mut total = 0.0;
        for (k, &i) in scm.features.iter().enumerate() {
            let node = &scm.nodes[i];
            for (slot, &p) in parents.iter_mut().zip(&node.parents) {
                *slot = x[scm.feature_pos[p].expect("checked at construction")];
            }
            let Mechanism::Additive(mean) = &node.mechanism else {
                unreachable!("checked at construction")
            };
            let Noise::Gaussian { mean: mu, std } = node.noise else {
                unreachable!("checked at construction")
            };
            let z = (x[k] - mean(&parents[..node.parents.len()]) - mu) / std;
            total += -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        total
    }
}

impl Density for ScmDensity {
    fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("correlation must satisfy |rho| < 1, got {rho}")))
    }
}

/// Features `x1..xd` as a linear-Gaussian DAG in index order:
/// `X_j = Σ_{k<j} b_jk X_k + σ_j ε_j`, with coefficients from regressing each
/// coordinate on its predecessors.
pub fn linear_gaussian(mvn: &MultivariateNormal, output: Option<(&str, Mechanism, Noise)>) -> Result<Scm> {
    let d = mvn.dim();
    let cov = DMatrix::from_row_slice(d, d, &mvn.covariance());
    let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    let mut b = ScmBuilder::new();
    for j in 0..d {
        let mu_j = mvn.mean()[j];
        if j == 0 {
            b = b.node(&names[0], &[], Mechanism::root(), Noise::Gaussian { mean: mu_j, std: cov[(0, 0)].sqrt() })?;
            continue;
        }
        let prev = cov.view((0, 0), (j, j)).into_owned();
        let cross = DVector::from_iterator(j, (0..j).map(|k| cov[(j, k)]));
        let chol = Cholesky::new(prev).ok_or(Error::Singular)?;
        let coef = chol.solve(&cross);
        let resid_var = cov[(j, j)] - cross.dot(&coef);
        if resid_var <= 0.0 {
            return Err(Error::Singular);
        }
        let coef: Vec<f64> = coef.iter().copied().collect();
        let means: Vec<f64> = mvn.mean()[..j].to_vec();
        let parents: Vec<&str> = names[..j].iter().map(String::as_str).collect();
        let mech = Mechanism::additive(move |p: &[f64]| {
            coef.iter().zip(p).zip(&means).map(|((c, v), m)| c * (v - m)).sum()
        });
        b = b.node(&names[j], &parents, mech, Noise::Gaussian { mean: mu_j, std: resid_var.sqrt() })?;
    }
    let feature_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut b = b.features(&feature_refs);
    if let Some((name, mech, noise)) = output {
        let node_names: Vec<&str> = names.iter().map(String::as_str).collect();
        b = b.node(name, &node_names, mech, noise)?.output(name);
    }
    let mut scm = b.build()?;
    scm.gaussian = Some(mvn.clone());
    Ok(scm)
}

/// `X₁ = ε₁`, `X₂ = ρX₁ + √(1−ρ²)ε₂`, `Y = X₁`.
pub fn make_dag_scm(rho: f64) -> Result<Scm> {
    check_rho(rho)?;
    let s = (1.0 - rho * rho).sqrt();
    let mut scm = ScmBuilder::new()
        .node("x1", &[], Mechanism::root(), Noise::standard())?
        .node("x2", &["x1"], Mechanism::additive(move |p| rho * p[0]), Noise::Gaussian { mean: 0.0, std: s })?
        .node("y", &["x1", "x2"], Mechanism::general(|p, _| p[0]), Noise::Degenerate { value: 0.0 })?
        .features(&["x1", "x2"])
        .output("y")
        .build()?;
    scm.gaussian = Some(bivariate(rho)?);
    Ok(scm)
}

fn bivariate(rho: f64) -> Result<MultivariateNormal> {
    MultivariateNormal::new(vec![0.0, 0.0], vec![1.0, rho, rho, 1.0])
}

/// Bivariate standard normal with correlation `ρ` and `Y = 𝟙(X₁ > 1/2)`.
pub fn make_corr_gaussian_2d(rho: f64) -> Result<Scm> {
    check_rho(rho)?;
    let s = (1.0 - rho * rho).sqrt();
    let mut scm = ScmBuilder::new()
        .node("x1", &[], Mechanism::root(), Noise::standard())?
        .node("x2", &["x1"], Mechanism::additive(move |p| rho * p[0]), Noise::Gaussian { mean: 0.0, std: s })?
        .node(
            "y",
            &["x1", "x2"],
            Mechanism::general(|p, _| f64::from(u8::from(p[0] > 0.5))),
            Noise::Degenerate { value: 0.0 },
        )?
        .features(&["x1", "x2"])
        .output("y")
        .build()?;
    scm.gaussian = Some(bivariate(rho)?);
    Ok(scm)
}

/// `X₁ ~ 𝒩(0, 4)`, `X₂ | X₁ ~ 𝒩(sin X₁, 0.01)`, `Y = X₁`. Second arguments
/// are variances.
pub fn make_sine_scm() -> Result<Scm> {
    ScmBuilder::new()
        .node("x1", &[], Mechanism::root(), Noise::Gaussian { mean: 0.0, std: 2.0 })?
        .node("x2", &["x1"], Mechanism::additive(|p| p[0].sin()), Noise::Gaussian { mean: 0.0, std: 0.1 })?
        .node("y", &["x1", "x2"], Mechanism::general(|p, _| p[0]), Noise::Degenerate { value: 0.0 })?
        .features(&["x1", "x2"])
        .output("y")
        .build()
}

/// `X ~ 𝒩(0, I₂)` with `Y = exp(X₁²/2)`.
pub fn make_indep_gaussian_2d() -> Result<Scm> {
    let mut scm = ScmBuilder::new()
        .node("x1", &[], Mechanism::root(), Noise::standard())?
        .node("x2", &[], Mechanism::root(), Noise::standard())?
        .node(
            "y",
            &["x1", "x2"],
            Mechanism::general(|p, _| (0.5 * p[0] * p[0]).exp()),
            Noise::Degenerate { value: 0.0 },
        )?
        .features(&["x1", "x2"])
        .output("y")
        .build()?;
    scm.gaussian = Some(MultivariateNormal::standard(2));
    Ok(scm)
}

/// `X ~ 𝒩(0, Σ)` with `Σᵢⱼ = 𝟙(i=j) + ρ𝟙(i≠j)` and `Y = X₁`.
pub fn make_equicorrelated(d: usize, rho: f64) -> Result<Scm> {
    check_rho(rho)?;
    if d < 2 {
        return Err(Error::Domain(format!("equicorrelated SCM needs d >= 2, got {d}")));
    }
    if rho <= -1.0 / (d as f64 - 1.0) {
        return Err(Error::Domain(format!("rho = {rho} is not a valid correlation for d = {d}")));
    }
    let mvn = MultivariateNormal::equicorrelated(d, rho)?;
    linear_gaussian(
        &mvn,
        Some(("y", Mechanism::general(|p, _| p[0]), Noise::Degenerate { value: 0.0 })),
    )
}

/// Builder lookup by name, as used in configuration files.
pub fn build_named(name: &str, rho: Option<f64>, d: Option<usize>) -> Result<Scm> {
    let need_rho = || rho.ok_or_else(|| Error::Config(format!("SCM {name:?} needs rho")));
    match name {
        "dag_rho" => make_dag_scm(need_rho()?),
        "corr_gaussian_2d" => make_corr_gaussian_2d(need_rho()?),
        "sine" => make_sine_scm(),
        "indep_gaussian_2d" => make_indep_gaussian_2d(),
        "equicorrelated" => make_equicorrelated(
            d.ok_or_else(|| Error::Config("SCM \"equicorrelated\" needs d".into()))?,
            rho.unwrap_or(0.9),
        ),
        other => Err(Error::Config(format!(
            "unknown SCM {other:?}; expected one of {}",
            SCM_NAMES.join(", ")
        ))),
    }
}

pub const SCM_NAMES: &[&str] = &["dag_rho", "corr_gaussian_2d", "sine", "indep_gaussian_2d", "equicorrelated"];

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn var(v: &[f64]) -> f64 {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0);
        cov / (var(a) * var(b)).sqrt()
    }

    #[test]
    fn dag_correlation_and_variance() {
        let scm = make_dag_scm(0.85).unwrap();
        let data = scm.sample_observational(100_000, &mut RngStream::new(1)).unwrap();
        let (x1, x2) = (data.column(0), data.column(1));
        assert!((corr(&x1, &x2) - 0.85).abs() < 0.01);
        assert!((var(&x2) - 1.0).abs() < 0.03);
        // Y = X1.
        assert_eq!(data.target().unwrap(), x1.as_slice());
    }

    #[test]
    fn single_node_mean() {
        let scm = ScmBuilder::new()
            .node("x", &[], Mechanism::root(), Noise::standard())
            .unwrap()
            .build()
            .unwrap();
        let data = scm.sample_observational(100_000, &mut RngStream::new(2)).unwrap();
        assert!(mean(&data.column(0)).abs() < 0.02);
    }

    #[test]
    fn sine_residual_mean_and_variance() {
        let scm = make_sine_scm().unwrap();
        let data = scm.sample_observational(10_000, &mut RngStream::new(3)).unwrap();
        let resid: Vec<f64> = data.rows().map(|r| r[1] - r[0].sin()).collect();
        assert!(mean(&resid).abs() < 0.01);
        assert!((var(&data.column(0)) - 4.0).abs() < 0.15);
    }

    #[test]
    fn intervening_on_child_leaves_parent_marginal() {
        let scm = make_dag_scm(0.85).unwrap();
        let spec = InterventionSpec::new(Coalition::from_indices([1]), vec![2.0]).unwrap();
        let data = scm.sample_interventional(&spec, 20_000, &mut RngStream::new(4)).unwrap();
        let x1 = data.column(0);
        assert!(mean(&x1).abs() < 0.02);
        assert!((var(&x1) - 1.0).abs() < 0.03);
        assert!(data.column(1).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn intervening_on_parent_propagates() {
        let scm = make_dag_scm(0.85).unwrap();
        let spec = InterventionSpec::new(Coalition::from_indices([0]), vec![1.0]).unwrap();
        let data = scm.sample_interventional(&spec, 20_000, &mut RngStream::new(5)).unwrap();
        let x2 = data.column(1);
        assert!((mean(&x2) - 0.85).abs() < 0.02);
        assert!((var(&x2) - (1.0 - 0.85f64.powi(2))).abs() < 0.02);
    }

    #[test]
    fn empty_intervention_is_observational() {
        let scm = make_dag_scm(0.85).unwrap();
        let spec = InterventionSpec::new(Coalition::EMPTY, vec![]).unwrap();
        let a = scm.sample_interventional(&spec, 100, &mut RngStream::new(6)).unwrap();
        let b = scm.sample_observational(100, &mut RngStream::new(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_node_errors() {
        let scm = make_dag_scm(0.5).unwrap();
        let spec = InterventionSpec::new(Coalition::from_indices([3]), vec![0.0]).unwrap();
        assert!(scm.sample_interventional(&spec, 10, &mut RngStream::new(0)).is_err());
        assert!(InterventionSpec::new(Coalition::from_indices([0]), vec![]).is_err());
    }

    #[test]
    fn builders_reject_bad_rho() {
        assert!(make_dag_scm(1.0).is_err());
        assert!(make_corr_gaussian_2d(-1.2).is_err());
        assert!(make_equicorrelated(1, 0.5).is_err());
        assert!(build_named("nosuch", None, None).is_err());
        assert!(build_named("dag_rho", Some(0.85), None).is_ok());
    }

    #[test]
    fn equicorrelated_spectrum_and_sampling() {
        use nalgebra::SymmetricEigen;
        let scm = make_equicorrelated(10, 0.9).unwrap();
        let mvn = scm.joint_gaussian().unwrap();
        let cov = DMatrix::from_row_slice(10, 10, &mvn.covariance());
        let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for v in &eig[..9] {
            assert_relative_eq!(*v, 0.1, epsilon = 1e-10);
        }
        assert_relative_eq!(eig[9], 1.0 + 9.0 * 0.9, epsilon = 1e-10);

        let data = scm.sample_observational(50_000, &mut RngStream::new(7)).unwrap();
        let c = data.covariance();
        assert!((c[0] - 1.0).abs() < 0.03 && (c[3 * 10 + 7] - 0.9).abs() < 0.03);
    }

    #[test]
    fn oracle_density_matches_gaussian() {
        let scm = make_dag_scm(0.85).unwrap();
        let dens = scm.density().unwrap();
        let mvn = scm.joint_gaussian().unwrap();
        for x in [[0.0, 0.0], [1.0, -0.5], [2.0, 2.0]] {
            assert_relative_eq!(dens.density(&x), mvn.density(&x), max_relative = 1e-12);
        }
        let eq = make_equicorrelated(4, 0.9).unwrap();
        let x = [0.3, 0.1, 0.5, -0.2];
        assert_relative_eq!(
            eq.density().unwrap().density(&x),
            eq.joint_gaussian().unwrap().density(&x),
            max_relative = 1e-10
        );
        assert!(make_corr_gaussian_2d(0.9).unwrap().density().is_ok());
    }

    #[test]
    fn ground_truth_suppresses_noise() {
        let f = make_corr_gaussian_2d(0.9).unwrap().ground_truth_model().unwrap();
        assert_eq!(f.eval(&[0.6, -3.0]), 1.0);
        assert_eq!(f.eval(&[0.4, 3.0]), 0.0);
        let g = make_indep_gaussian_2d().unwrap().ground_truth_model().unwrap();
        assert_relative_eq!(g.eval(&[2.0, 0.0]), 2.0f64.exp());
    }
}
