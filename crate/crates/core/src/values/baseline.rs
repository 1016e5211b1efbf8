use std::sync::Arc;

use super::{check_samples, Moments, ValueEstimate, ValueFunction};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::manifold::Density;
use crate::model::Model;
use crate::rng::RngStream;
use crate::sampler::CoalitionSampler;

pub(super) fn joint_baseline(
    f: &dyn Model,
    density: &dyn Density,
    baseline: &[f64],
    coalition: Coalition,
    x: &[f64],
) -> Result<f64> {
    if baseline.len() != x.len() {
        return Err(Error::Dimension { expected: x.len(), got: baseline.len() });
    }
    coalition.check_within(x.len())?;
    let z: Vec<f64> = (0..x.len())
        .map(|j| if coalition.contains(j) { x[j] } else { baseline[j] })
        .collect();
    Ok(f.eval(&z) * density.density(&z))
}

/// `f(x_S, x′_S̄) p(x_S, x′_S̄)` for a fixed baseline `x′`.
#[derive(Clone)]
pub struct JointBaselineValue {
    model: Arc<dyn Model>,
    density: Arc<dyn Density>,
    baseline: Vec<f64>,
}

impl JointBaselineValue {
    pub fn new(model: Arc<dyn Model>, density: Arc<dyn Density>, baseline: Vec<f64>) -> Self {
        JointBaselineValue { model, density, baseline }
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }
}

impl ValueFunction for JointBaselineValue {
    fn dim(&self) -> usize {
        self.baseline.len()
    }

    fn value(&self, coalition: Coalition, x: &[f64], _rng: &mut RngStream) -> Result<ValueEstimate> {
        joint_baseline(self.model.as_ref(), self.density.as_ref(), &self.baseline, coalition, x)
            .map(ValueEstimate::exact)
    }
}

/// `(1/m) Σ f(x_S, X_S̄) p(x_S, X_S̄)` with the baseline prior given by a
/// sampler (normally resampled rows, i.e. the marginal).
#[derive(Clone)]
pub struct RandomJointBaselineValue {
    model: Arc<dyn Model>,
    density: Arc<dyn Density>,
    prior: Arc<dyn CoalitionSampler>,
    m: usize,
}

impl RandomJointBaselineValue {
    pub fn new(
        model: Arc<dyn Model>,
        density: Arc<dyn Density>,
        prior: Arc<dyn CoalitionSampler>,
        m: usize,
    ) -> Result<Self> {
        check_samples(m)?;
        Ok(RandomJointBaselineValue { model, density, prior, m })
    }
}

impl ValueFunction for RandomJointBaselineValue {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        coalition.check_within(d)?;
        if coalition == Coalition::full(d) {
            return Ok(ValueEstimate::exact(self.model.eval(x) * self.density.density(x)));
        }
        let bound = self.prior.bind(coalition, x)?;
        let mut row = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..self.m {
            bound.draw(&mut row, rng);
            acc.push(self.model.eval(&row) * self.density.density(&row));
        }
        Ok(ValueEstimate {
            value: acc.mean(),
            std_error: acc.std_error(),
            n_samples: self.m,
            attempts: self.m,
        })
    }
}
