use std::sync::Arc;

use super::{ValueEstimate, ValueFunction};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::model::Model;
use crate::rng::RngStream;

/// Finite distribution: distinct support points with their probabilities,
/// sorted by point.
pub type Pmf = Vec<(Vec<f64>, f64)>;

/// A finite joint distribution over feature vectors whose features share
/// only latent (unobserved) causes, so `do(X_S = x_S)` leaves `X_S̄` at its
/// marginal.
#[derive(Clone, Debug)]
pub struct DiscreteJoint {
    outcomes: Vec<Vec<f64>>,
    probs: Vec<f64>,
    d: usize,
}

fn merge(mut pairs: Vec<(Vec<f64>, f64)>) -> Pmf {
    pairs.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Pmf = Vec::with_capacity(pairs.len());
    for (p, w) in pairs {
        match out.last_mut() {
            Some((q, acc)) if *q == p => *acc += w,
            _ => out.push((p, w)),
        }
    }
    out
}

impl DiscreteJoint {
    pub fn new(outcomes: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != probs.len() {
            return Err(Error::Domain("outcomes and probabilities must be nonempty and equal length".into()));
        }
        let d = outcomes[0].len();
        if let Some(o) = outcomes.iter().find(|o| o.len() != d) {
            return Err(Error::Dimension { expected: d, got: o.len() });
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Domain("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscreteJoint { outcomes, probs, d })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn outcomes(&self) -> &[Vec<f64>] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Joint pmf with duplicate points merged.
    pub fn pmf(&self) -> Pmf {
        merge(self.outcomes.iter().cloned().zip(self.probs.iter().copied()).collect())
    }

    fn splice(coalition: Coalition, x: &[f64], o: &[f64]) -> Vec<f64> {
        (0..x.len()).map(|j| if coalition.contains(j) { x[j] } else { o[j] }).collect()
    }

    /// Distribution of the full point `(x_S, X_S̄)` under `do(X_S = x_S)`.
    pub fn interventional_pmf(&self, coalition: Coalition, x: &[f64]) -> Result<Pmf> {
        self.check(coalition, x)?;
        Ok(merge(
            self.outcomes
                .iter()
                .zip(&self.probs)
                .map(|(o, p)| (Self::splice(coalition, x, o), *p))
                .collect(),
        ))
    }

    /// Distribution of `X` given `X_S = x_S`.
    pub fn conditional_pmf(&self, coalition: Coalition, x: &[f64]) -> Result<Pmf> {
        self.check(coalition, x)?;
        let hits: Vec<(Vec<f64>, f64)> = self
            .outcomes
            .iter()
            .zip(&self.probs)
            .filter(|(o, _)| coalition.iter().all(|j| o[j] == x[j]))
            .map(|(o, p)| (o.clone(), *p))
            .collect();
        let mass: f64 = hits.iter().map(|h| h.1).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        Ok(merge(hits.into_iter().map(|(o, p)| (o, p / mass)).collect()))
    }

    /// Interventional distribution restricted to `𝒵` and renormalised, on the
    /// same support as [`interventional_pmf`](Self::interventional_pmf)
    /// (points outside `𝒵` carry zero).
    pub fn restricted_pmf(&self, coalition: Coalition, x: &[f64], manifold: &dyn Manifold) -> Result<Pmf> {
        let mut pmf = self.interventional_pmf(coalition, x)?;
        let mass: f64 = pmf.iter().filter(|(z, _)| manifold.contains(z)).map(|(_, p)| p).sum();
        if mass <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        for (z, p) in pmf.iter_mut() {
            *p = if manifold.contains(z) { *p / mass } else { 0.0 };
        }
        Ok(pmf)
    }

    fn check(&self, coalition: Coalition, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        coalition.check_within(self.d)
    }
}

/// Binary pair with a fair latent coin `Z`: `X₁ = Z`, `X₂ = Z` with
/// probability `p`, otherwise `1 − Z`.
pub fn binary_confounded_pair(p: f64) -> Result<DiscreteJoint> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0, 1], got {p}")));
    }
    let mut outcomes = Vec::new();
    let mut probs = Vec::new();
    for z in [0.0, 1.0] {
        outcomes.push(vec![z, z]);
        probs.push(0.5 * p);
        outcomes.push(vec![z, 1.0 - z]);
        probs.push(0.5 * (1.0 - p));
    }
    DiscreteJoint::new(outcomes, probs)
}

#[derive(Clone)]
pub enum DiscreteValueKind {
    Interventional,
    Conditional,
    Manifold(Arc<dyn Manifold>),
}

/// Exact value function by enumeration over a [`DiscreteJoint`].
#[derive(Clone)]
pub struct DiscreteValue {
    joint: Arc<DiscreteJoint>,
    model: Arc<dyn Model>,
    kind: DiscreteValueKind,
}

impl DiscreteValue {
    pub fn new(joint: Arc<DiscreteJoint>, model: Arc<dyn Model>, kind: DiscreteValueKind) -> Self {
        DiscreteValue { joint, model, kind }
    }

    pub fn exact(&self, coalition: Coalition, x: &[f64]) -> Result<f64> {
        let pmf = match &self.kind {
            DiscreteValueKind::Interventional => self.joint.interventional_pmf(coalition, x)?,
            DiscreteValueKind::Conditional => self.joint.conditional_pmf(coalition, x)?,
            DiscreteValueKind::Manifold(z) => {
                if !z.contains(x) {
                    return Err(Error::OutsideManifold);
                }
                self.joint.restricted_pmf(coalition, x, z.as_ref())?
            }
        };
        Ok(pmf.iter().filter(|(_, p)| *p > 0.0).map(|(z, p)| p * self.model.eval(z)).sum())
    }
}

impl ValueFunction for DiscreteValue {
    fn dim(&self) -> usize {
        self.joint.dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], _rng: &mut RngStream) -> Result<ValueEstimate> {
        self.exact(coalition, x).map(ValueEstimate::exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::model;

    struct Excluding(Vec<f64>);
    impl Manifold for Excluding {
        fn contains(&self, x: &[f64]) -> bool {
            x != self.0.as_slice()
        }
    }

    #[test]
    fn confounded_pair_values() {
        let joint = Arc::new(binary_confounded_pair(0.9).unwrap());
        let f = model(|x: &[f64]| x[0]);
        let is = DiscreteValue::new(joint.clone(), f.clone(), DiscreteValueKind::Interventional);
        let ces = DiscreteValue::new(joint, f, DiscreteValueKind::Conditional);
        let x = [1.0, 1.0];
        assert!((is.exact(Coalition::from_indices([1]), &x).unwrap() - 0.5).abs() < 1e-12);
        assert!((is.exact(Coalition::from_indices([0]), &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((ces.exact(Coalition::from_indices([1]), &x).unwrap() - 0.9).abs() < 1e-12);
        assert!((ces.exact(Coalition::from_indices([1]), &[1.0, 0.0]).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_condition() {
        let joint = Arc::new(binary_confounded_pair(1.0).unwrap());
        let ces = DiscreteValue::new(joint, model(|x: &[f64]| x[0]), DiscreteValueKind::Conditional);
        assert!(matches!(ces.exact(Coalition::full(2), &[1.0, 0.0]), Err(Error::ZeroProbability)));
    }

    #[test]
    fn restricted_normalises() {
        let joint = binary_confounded_pair(0.6).unwrap();
        let z = Excluding(vec![0.0, 1.0]);
        for s in 0..4u64 {
            let pmf = joint.restricted_pmf(Coalition::from_bits(s), &[1.0, 1.0], &z).unwrap();
            let total: f64 = pmf.iter().map(|p| p.1).sum();
            assert_eq!(total, 1.0);
            assert!(pmf.iter().all(|(pt, p)| z.contains(pt) || *p == 0.0));
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(binary_confounded_pair(1.5).is_err());
        assert!(DiscreteJoint::new(vec![vec![0.0]], vec![0.5]).is_err());
        assert!(DiscreteJoint::new(vec![vec![0.0], vec![0.0, 1.0]], vec![0.5, 0.5]).is_err());
    }
}
