//! Samplers that fill the free coordinates of a row given fixed `x_S`.
//!
//! Every sampler consumes the same amount of randomness per row regardless of
//! the coalition, so value functions evaluated on one stream for different
//! coalitions share common random numbers.

use std::sync::Arc;

use rand::Rng;

use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianConditional, MultivariateNormal};
use crate::rng::RngStream;
use crate::scm::Scm;

pub trait CoalitionSampler: Send + Sync {
    fn dim(&self) -> usize;

    /// Fix the coalition and its values, doing any per-coalition setup once.
    fn bind<'a>(&'a self, coalition: Coalition, x: &'a [f64])
        -> Result<Box<dyn BoundSampler + 'a>>;
}

pub trait BoundSampler {
    /// Write one full row into `out`; coordinates in the coalition equal `x_S`.
    fn draw(&self, out: &mut [f64], rng: &mut RngStream);
}

pub type SharedSampler = Arc<dyn CoalitionSampler>;

fn check_point(d: usize, coalition: Coalition, x: &[f64]) -> Result<()> {
    coalition.check_within(d)?;
    if x.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: x.len(),
        });
    }
    Ok(())
}

/// `X_S̄` drawn jointly from uniformly resampled rows of a dataset, ignoring
/// `x_S`. This is the marginal law, and the interventional law whenever the
/// features have no causal links among themselves.
#[derive(Clone, Debug)]
pub struct RowSampler {
    data: Arc<Dataset>,
}

impl RowSampler {
    pub fn new(data: Arc<Dataset>) -> Self {
        RowSampler { data }
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }
}

struct BoundRows<'a> {
    data: &'a Dataset,
    coalition: Coalition,
    x: &'a [f64],
}

impl BoundSampler for BoundRows<'_> {
    fn draw(&self, out: &mut [f64], rng: &mut RngStream) {
        let i = rng.gen_range(0..self.data.n_rows());
        out.copy_from_slice(self.data.row(i));
        for j in self.coalition.iter() {
            out[j] = self.x[j];
        }
    }
}

impl CoalitionSampler for RowSampler {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn bind<'a>(
        &'a self,
        coalition: Coalition,
        x: &'a [f64],
    ) -> Result<Box<dyn BoundSampler + 'a>> {
        check_point(self.dim(), coalition, x)?;
        Ok(Box::new(BoundRows {
            data: &self.data,
            coalition,
            x,
        }))
    }
}

/// Marginal law realised by fresh observational draws from an SCM, then
/// overwriting `x_S`. Same distribution as [`RowSampler`] over an infinite
/// sample.
#[derive(Clone)]
pub struct ObservationalMarginal {
    scm: Arc<Scm>,
}

impl ObservationalMarginal {
    pub fn new(scm: Arc<Scm>) -> Self {
        ObservationalMarginal { scm }
    }
}

struct BoundObservational<'a> {
    scm: &'a Scm,
    coalition: Coalition,
    x: &'a [f64],
    scratch_len: usize,
}

impl BoundSampler for BoundObservational<'_> {
    fn draw(&self, out: &mut [f64], rng: &mut RngStream) {
        let mut nodes = [0.0f64; 128];
        let nodes = &mut nodes[..self.scratch_len];
        self.scm.draw_nodes(&[], nodes, rng);
        self.scm.features_into(nodes, out);
        for j in self.coalition.iter() {
            out[j] = self.x[j];
        }
    }
}

impl CoalitionSampler for ObservationalMarginal {
    fn dim(&self) -> usize {
        self.scm.n_features()
    }

    fn bind<'a>(
        &'a self,
        coalition: Coalition,
        x: &'a [f64],
    ) -> Result<Box<dyn BoundSampler + 'a>> {
        check_point(self.dim(), coalition, x)?;
        Ok(Box::new(BoundObservational {
            scm: &self.scm,
            coalition,
            x,
            scratch_len: self.scm.n_nodes(),
        }))
    }
}

/// `do(X_S = x_S)` by truncated factorization over an SCM.
#[derive(Clone)]
pub struct InterventionalSampler {
    scm: Arc<Scm>,
}

impl InterventionalSampler {
    pub fn new(scm: Arc<Scm>) -> Self {
        InterventionalSampler { scm }
    }
}

struct BoundIntervention<'a> {
    scm: &'a Scm,
    fixed: Vec<(usize, f64)>,
    scratch_len: usize,
}

impl BoundSampler for BoundIntervention<'_> {
    fn draw(&self, out: &mut [f64], rng: &mut RngStream) {
        let mut nodes = [0.0f64; 128];
        let nodes = &mut nodes[..self.scratch_len];
        self.scm.draw_nodes(&self.fixed, nodes, rng);
        self.scm.features_into(nodes, out);
    }
}

impl CoalitionSampler for InterventionalSampler {
    fn dim(&self) -> usize {
        self.scm.n_features()
    }

    fn bind<'a>(
        &'a self,
        coalition: Coalition,
        x: &'a [f64],
    ) -> Result<Box<dyn BoundSampler + 'a>> {
        check_point(self.dim(), coalition, x)?;
        Ok(Box::new(BoundIntervention {
            scm: &self.scm,
            fixed: self.scm.intervention_targets(coalition, x)?,
            scratch_len: self.scm.n_nodes(),
        }))
    }
}

/// Analytic Gaussian conditional `X_S̄ | X_S = x_S`.
#[derive(Clone, Debug)]
pub struct GaussianConditionalSampler {
    mvn: MultivariateNormal,
}

impl GaussianConditionalSampler {
    pub fn new(mvn: MultivariateNormal) -> Self {
        GaussianConditionalSampler { mvn }
    }
}

struct BoundGaussian(GaussianConditional);

impl BoundSampler for BoundGaussian {
    fn draw(&self, out: &mut [f64], rng: &mut RngStream) {
        self.0.draw_into(out, rng);
    }
}

impl CoalitionSampler for GaussianConditionalSampler {
    fn dim(&self) -> usize {
        self.mvn.dim()
    }

    fn bind<'a>(
        &'a self,
        coalition: Coalition,
        x: &'a [f64],
    ) -> Result<Box<dyn BoundSampler + 'a>> {
        Ok(Box::new(BoundGaussian(self.mvn.condition(coalition, x)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm;

    #[test]
    fn row_sampler_matches_marginal_resampling() {
        // Seed-matched: the sampler's draw equals the dataset row picked by
        // the same stream, with x_S overwritten.
        let data = Arc::new(Dataset::unnamed((0..20).map(|v| v as f64).collect(), 2).unwrap());
        let sampler = RowSampler::new(data.clone());
        let x = [100.0, 200.0];
        let s = Coalition::from_indices([1]);
        let bound = sampler.bind(s, &x).unwrap();
        let mut a = RngStream::new(9);
        let mut b = RngStream::new(9);
        let mut out = [0.0; 2];
        for _ in 0..50 {
            bound.draw(&mut out, &mut a);
            let i = b.gen_range(0..data.n_rows());
            assert_eq!(out, [data.row(i)[0], 200.0]);
        }
    }

    #[test]
    fn coalition_out_of_range_errors() {
        let scm = Arc::new(scm::make_dag_scm(0.85).unwrap());
        let s = InterventionalSampler::new(scm);
        assert!(s.bind(Coalition::from_indices([2]), &[0.0, 0.0]).is_err());
    }
}
