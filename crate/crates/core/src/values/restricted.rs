use std::sync::Arc;

use super::{check_samples, Moments, ValueEstimate, ValueFunction};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::model::Model;
use crate::rng::RngStream;
use crate::sampler::CoalitionSampler;

/// Rejection draws allowed per requested sample before giving up.
pub const DEFAULT_CAP_FACTOR: usize = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictedEstimator {
    /// Draw until `m` samples land in the manifold, average `f` over them.
    #[default]
    Rejection,
    /// `Σ f·1(∈𝒵) / Σ 1(∈𝒵)` over a fixed `m` draws.
    Ratio,
}

/// Interventional expectation restricted to a manifold:
/// `E[f(X) | do(X_S = x_S), X ∈ 𝒵]`.
///
/// `f` is only ever evaluated at points inside `𝒵`, so two models that agree
/// on `𝒵` give bit-identical values under the same stream.
#[derive(Clone)]
pub struct ManifoldValue {
    model: Arc<dyn Model>,
    manifold: Arc<dyn Manifold>,
    sampler: Arc<dyn CoalitionSampler>,
    m: usize,
    cap_factor: usize,
    estimator: RestrictedEstimator,
}

impl ManifoldValue {
    pub fn new(
        model: Arc<dyn Model>,
        manifold: Arc<dyn Manifold>,
        interventional: Arc<dyn CoalitionSampler>,
        m: usize,
    ) -> Result<Self> {
        check_samples(m)?;
        Ok(ManifoldValue {
            model,
            manifold,
            sampler: interventional,
            m,
            cap_factor: DEFAULT_CAP_FACTOR,
            estimator: RestrictedEstimator::Rejection,
        })
    }

    pub fn with_estimator(mut self, estimator: RestrictedEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn with_cap_factor(mut self, cap_factor: usize) -> Result<Self> {
        if cap_factor == 0 {
            return Err(Error::Domain("cap factor must be at least 1".into()));
        }
        self.cap_factor = cap_factor;
        Ok(self)
    }

    pub fn manifold(&self) -> &Arc<dyn Manifold> {
        &self.manifold
    }

    fn rejection(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        let bound = self.sampler.bind(coalition, x)?;
        let cap = self.cap_factor.saturating_mul(self.m);
        let mut row = vec![0.0; x.len()];
        let mut acc = Moments::default();
        let mut attempts = 0;
        while acc.count() < self.m && attempts < cap {
            bound.draw(&mut row, rng);
            attempts += 1;
            if self.manifold.contains(&row) {
                acc.push(self.model.eval(&row));
            }
        }
        if acc.count() == 0 {
            return Err(Error::AcceptanceFailure { coalition, attempts });
        }
        Ok(ValueEstimate {
            value: acc.mean(),
            std_error: acc.std_error(),
            n_samples: acc.count(),
            attempts,
        })
    }

    fn ratio(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        let bound = self.sampler.bind(coalition, x)?;
        let mut row = vec![0.0; x.len()];
        let mut accepted = Vec::new();
        for _ in 0..self.m {
            bound.draw(&mut row, rng);
            if self.manifold.contains(&row) {
                accepted.push(self.model.eval(&row));
            }
        }
        if accepted.is_empty() {
            return Err(Error::AcceptanceFailure { coalition, attempts: self.m });
        }
        let n = self.m as f64;
        let k = accepted.len() as f64;
        let num = accepted.iter().sum::<f64>() / n;
        let den = k / n;
        let value = num / den;
        // delta method on the per-draw terms (f - r)·1(∈𝒵) / den
        let var = accepted.iter().map(|f| (f - value).powi(2)).sum::<f64>() / n / (den * den);
        Ok(ValueEstimate {
            value,
            std_error: (var / n).sqrt(),
            n_samples: accepted.len(),
            attempts: self.m,
        })
    }
}

impl ValueFunction for ManifoldValue {
    fn dim(&self) -> usize {
        self.sampler.dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        coalition.check_within(d)?;
        if !self.manifold.contains(x) {
            return Err(Error::OutsideManifold);
        }
        if coalition == Coalition::full(d) {
            return Ok(ValueEstimate::exact(self.model.eval(x)));
        }
        match self.estimator {
            RestrictedEstimator::Rejection => self.rejection(coalition, x, rng),
            RestrictedEstimator::Ratio => self.ratio(coalition, x, rng),
        }
    }
}
