//! Value functions `v(S)` for one explained point `x`.
//!
//! | name            | `v(S)`                                              |
//! |-----------------|-----------------------------------------------------|
//! | `ms`            | `E[f(x_S, X_S̄)]`, `X_S̄` from resampled rows         |
//! | `is`            | `E[f(X) | do(X_S = x_S)]`                            |
//! | `ces-analytic`  | `E[f(X) | X_S = x_S]` from an analytic conditional  |
//! | `ces-surrogate` | masked k-NN regression of `f` on `x_S`              |
//! | `jb`            | `f(x_S, x′_S̄) p(x_S, x′_S̄)`                         |
//! | `rjb`           | `E[f(x_S, X_S̄) p(x_S, X_S̄)]`, rows resampled        |
//! | `manifold`      | `E[f(X) | do(X_S = x_S), X ∈ 𝒵]`                    |
//!
//! Every implementation returns `f(x)` (times `p(x)` for the baseline kinds)
//! for the full coalition without sampling, and draws the same amount of
//! randomness for every coalition so one stream gives common random numbers.

mod baseline;
mod discrete;
mod monte_carlo;
mod restricted;
mod surrogate;

use std::sync::Arc;

pub use baseline::{JointBaselineValue, RandomJointBaselineValue};
pub use discrete::{binary_confounded_pair, DiscreteJoint, DiscreteValue, DiscreteValueKind, Pmf};
pub use monte_carlo::MonteCarloValue;
pub use restricted::{ManifoldValue, RestrictedEstimator, DEFAULT_CAP_FACTOR};
pub use surrogate::{fit_ces_surrogate, CesSurrogate, SurrogateParams};

use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::manifold::{Density, Manifold};
use crate::model::Model;
use crate::rng::RngStream;
use crate::sampler::{CoalitionSampler, InterventionalSampler, RowSampler};
use crate::scm::Scm;

/// Point estimate of `v(S)` with its Monte-Carlo standard error (zero for
/// exact values).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Model evaluations averaged.
    pub n_samples: usize,
    /// Draws made, including rejected ones.
    pub attempts: usize,
}

impl ValueEstimate {
    pub fn exact(value: f64) -> Self {
        ValueEstimate {
            value,
            std_error: 0.0,
            n_samples: 0,
            attempts: 0,
        }
    }
}

pub trait ValueFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate>;
}

impl<V: ValueFunction + ?Sized> ValueFunction for Arc<V> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        (**self).value(coalition, x, rng)
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, coalition: Coalition, x: &[f64], rng: &mut RngStream) -> Result<ValueEstimate> {
        (**self).value(coalition, x, rng)
    }
}

pub type SharedValueFunction = Arc<dyn ValueFunction>;

/// Value-function names accepted in configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ms,
    Is,
    CesAnalytic,
    CesSurrogate,
    Jb,
    Rjb,
    Manifold,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ms,
        Method::Is,
        Method::CesAnalytic,
        Method::CesSurrogate,
        Method::Jb,
        Method::Rjb,
        Method::Manifold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ms => "ms",
            Method::Is => "is",
            Method::CesAnalytic => "ces-analytic",
            Method::CesSurrogate => "ces-surrogate",
            Method::Jb => "jb",
            Method::Rjb => "rjb",
            Method::Manifold => "manifold",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method {s:?}; valid methods: {}", names.join(", ")))
            })
    }
}

pub(crate) fn check_samples(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::Domain("sample count m must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n as f64 - 1.0) / self.n as f64).sqrt()
        }
    }
}

/// Marginal expectation with `X_S̄` from `m` resampled dataset rows.
pub fn ms_value(
    f: Arc<dyn Model>,
    data: Arc<Dataset>,
    coalition: Coalition,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let vf = MonteCarloValue::new(f, Arc::new(RowSampler::new(data)), m)?;
    Ok(vf.value(coalition, x, rng)?.value)
}

/// Interventional expectation by sampling `do(X_S = x_S)` from an SCM.
pub fn is_value(
    f: Arc<dyn Model>,
    scm: Arc<Scm>,
    coalition: Coalition,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let vf = MonteCarloValue::new(f, Arc::new(InterventionalSampler::new(scm)), m)?;
    Ok(vf.value(coalition, x, rng)?.value)
}

/// Conditional expectation through a conditional sampler.
pub fn ces_value(
    f: Arc<dyn Model>,
    conditional: Arc<dyn CoalitionSampler>,
    coalition: Coalition,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let vf = MonteCarloValue::new(f, conditional, m)?;
    Ok(vf.value(coalition, x, rng)?.value)
}

pub fn jb_value(f: &dyn Model, density: &dyn Density, baseline: &[f64], coalition: Coalition, x: &[f64]) -> Result<f64> {
    baseline::joint_baseline(f, density, baseline, coalition, x)
}

pub fn rjb_value(
    f: Arc<dyn Model>,
    density: Arc<dyn Density>,
    data: Arc<Dataset>,
    coalition: Coalition,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let vf = RandomJointBaselineValue::new(f, density, Arc::new(RowSampler::new(data)), m)?;
    Ok(vf.value(coalition, x, rng)?.value)
}

/// Restricted interventional expectation by rejection.
pub fn manifold_value(
    f: Arc<dyn Model>,
    manifold: Arc<dyn Manifold>,
    interventional: Arc<dyn CoalitionSampler>,
    coalition: Coalition,
    x: &[f64],
    m: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let vf = ManifoldValue::new(f, manifold, interventional, m)?;
    Ok(vf.value(coalition, x, rng)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        let err = "shap".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("ces-surrogate") && err.contains("manifold"));
    }

    #[test]
    fn moments_match_two_pass() {
        let v = [1.0, 2.0, 4.0, 8.0];
        let mut m = Moments::default();
        v.iter().for_each(|x| m.push(*x));
        let mean = 3.75;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.std_error() - (var / 4.0).sqrt()).abs() < 1e-12);
    }
}
