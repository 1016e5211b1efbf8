use std::sync::Arc;

use super::{check_samples, Moments, ValueEstimate, ValueFunction};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::RngStream;
use crate::sampler::CoalitionSampler;

/// `(1/m) Σ f(row)` with rows drawn by a coalition sampler. With a row
/// sampler this is MS, with an interventional sampler IS, with a conditional
/// sampler CES.
#[derive(Clone)]
pub struct MonteCarloValue {
    model: Arc<dyn Model>,
    sampler: Arc<dyn CoalitionSampler>,
    m: usize,
}

impl MonteCarloValue {
    pub fn new(model: Arc<dyn Model>, sampler: Arc<dyn CoalitionSampler>, m: usize) -> Result<Self> {
        check_samples(m)?;
        Ok(MonteCarloValue { model, sampler, m })
    }

    pub fn model(&self) -> &Arc<dyn Model> {
        &self.model
    }
}

impl ValueFunction for MonteCarloValue {
    fn dim(&self) -> usize {
        self.sampler.dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        coalition.check_within(d)?;
        if coalition == Coalition::full(d) {
            return Ok(ValueEstimate::exact(self.model.eval(x)));
        }
        let bound = self.sampler.bind(coalition, x)?;
        let mut row = vec![0.0; d];
        let mut acc = Moments::default();
        for _ in 0..self.m {
            bound.draw(&mut row, rng);
            acc.push(self.model.eval(&row));
        }
        Ok(ValueEstimate {
            value: acc.mean(),
            std_error: acc.std_error(),
            n_samples: self.m,
            attempts: self.m,
        })
    }
}
