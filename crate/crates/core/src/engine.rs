//! Shapley attribution engines.
//!
//! Every engine takes a stream for the explained point. Value functions are
//! always evaluated on clones of one derived stream (common random numbers),
//! so a Monte-Carlo `v` behaves as a fixed function within one run.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::Attribution;
use crate::coalition::{shapley_weights, Coalition, MAX_FEATURES};
use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::model::Model;
use crate::rng::{tag, RngStream};
use crate::sampler::CoalitionSampler;
use crate::values::ValueFunction;

pub const DEFAULT_MAX_EXACT_FEATURES: usize = 20;
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Exact,
    Permutation,
    ManifoldPermutation,
}

impl EngineKind {
    pub const ALL: [EngineKind; 3] = [EngineKind::Exact, EngineKind::Permutation, EngineKind::ManifoldPermutation];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Exact => "exact",
            EngineKind::Permutation => "permutation",
            EngineKind::ManifoldPermutation => "manifold-permutation",
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngineKind::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            Error::Config(format!("unknown engine {s:?}; valid engines: exact, permutation, manifold-permutation"))
        })
    }
}

fn values_stream(rng: &RngStream) -> RngStream {
    rng.child(tag::VALUES)
}

fn check_x(vf_dim: usize, x: &[f64]) -> Result<usize> {
    if x.len() != vf_dim {
        return Err(Error::Dimension { expected: vf_dim, got: x.len() });
    }
    if vf_dim == 0 {
        return Err(Error::Domain("cannot attribute a zero-dimensional point".into()));
    }
    Ok(vf_dim)
}

/// Every `v(S)` for one `(value function, x)`, indexed by coalition mask.
#[derive(Clone, Debug)]
pub struct EvalCache {
    d: usize,
    values: Vec<f64>,
}

impl EvalCache {
    /// Evaluate all `2ᵈ` coalitions in parallel, each on a clone of the same
    /// stream.
    pub fn fill(vf: &dyn ValueFunction, x: &[f64], rng: &RngStream, max_features: usize) -> Result<Self> {
        let d = check_x(vf.dim(), x)?;
        if d > max_features.min(MAX_FEATURES - 1) {
            return Err(Error::TooManyFeatures { d, limit: max_features });
        }
        let base = values_stream(rng);
        let values = (0..1u64 << d)
            .into_par_iter()
            .map(|bits| vf.value(Coalition::from_bits(bits), x, &mut base.clone()).map(|e| e.value))
            .collect::<Result<Vec<f64>>>()?;
        Ok(EvalCache { d, values })
    }

    pub fn from_values(d: usize, values: Vec<f64>) -> Result<Self> {
        if d >= MAX_FEATURES || values.len() != 1usize << d {
            return Err(Error::Domain(format!("cache for d = {d} needs 2^{d} values, got {}", values.len())));
        }
        Ok(EvalCache { d, values })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, s: Coalition) -> f64 {
        self.values[s.bits() as usize]
    }

    /// `φᵢ = Σ_{S∌i} w(|S|, d) (v(S∪{i}) − v(S))`.
    pub fn shapley(&self) -> Result<Attribution> {
        let d = self.d;
        let w = shapley_weights(d)?;
        let mut phi = vec![0.0; d];
        for (i, p) in phi.iter_mut().enumerate() {
            let bit = 1u64 << i;
            let mut acc = 0.0;
            for bits in 0..(1u64 << d) {
                if bits & bit == 0 {
                    let s = bits.count_ones() as usize;
                    acc += w[s] * (self.values[(bits | bit) as usize] - self.values[bits as usize]);
                }
            }
            *p = acc;
        }
        let mut a = Attribution::new(phi, self.values[0], self.values[(1usize << d) - 1]);
        a.n_samples = self.values.len();
        Ok(a)
    }
}

/// Exact enumeration over all coalitions, with the default guard of 20
/// features.
pub fn exact_shapley(vf: &dyn ValueFunction, x: &[f64], rng: &RngStream) -> Result<Attribution> {
    exact_shapley_with(vf, x, rng, DEFAULT_MAX_EXACT_FEATURES)
}

pub fn exact_shapley_with(
    vf: &dyn ValueFunction,
    x: &[f64],
    rng: &RngStream,
    max_features: usize,
) -> Result<Attribution> {
    match EvalCache::fill(vf, x, rng, max_features) {
        Err(Error::TooManyFeatures { d, limit }) => Err(Error::Config(format!(
            "exact engine enumerates 2^d coalitions and is limited to d <= {limit} (got d = {d}); use the permutation engine"
        ))),
        other => other?.shapley(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PermutationOptions {
    /// Pair each permutation with its reverse.
    pub antithetic: bool,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        PermutationOptions { antithetic: false }
    }
}

/// The permutations for one point: `M` of them, the `k`-th drawn from its own
/// stream.
#[derive(Clone, Debug)]
pub struct PermutationPlan {
    perms: Vec<Vec<usize>>,
    antithetic: bool,
}

impl PermutationPlan {
    pub fn new(d: usize, n_permutations: usize, rng: &RngStream, antithetic: bool) -> Result<Self> {
        if n_permutations == 0 {
            return Err(Error::Domain("number of permutations M must be at least 1".into()));
        }
        let base = rng.child(tag::PERMUTATIONS);
        let n_draws = if antithetic { n_permutations.div_ceil(2) } else { n_permutations };
        let mut perms = Vec::with_capacity(n_draws * if antithetic { 2 } else { 1 });
        for k in 0..n_draws {
            let mut p: Vec<usize> = (0..d).collect();
            p.shuffle(&mut base.child(k as u64));
            if antithetic {
                let mut r = p.clone();
                r.reverse();
                perms.push(p);
                perms.push(r);
            } else {
                perms.push(p);
            }
        }
        Ok(PermutationPlan { perms, antithetic })
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.perms
    }

    /// Groups averaged before variance estimation (pairs when antithetic).
    fn group(&self) -> usize {
        if self.antithetic {
            2
        } else {
            1
        }
    }
}

/// Mean and standard error per feature over the rows of `contrib`, after
/// averaging consecutive groups of `group` rows.
fn summarize(contrib: &[Vec<f64>], d: usize, group: usize) -> (Vec<f64>, Vec<f64>) {
    let units: Vec<Vec<f64>> = contrib
        .chunks(group)
        .map(|c| (0..d).map(|i| c.iter().map(|r| r[i]).sum::<f64>() / c.len() as f64).collect())
        .collect();
    let n = units.len() as f64;
    let mean: Vec<f64> = (0..d).map(|i| pairwise_sum(units.iter().map(|u| u[i])) / n).collect();
    let se = (0..d)
        .map(|i| {
            if units.len() < 2 {
                0.0
            } else {
                let ss = pairwise_sum(units.iter().map(|u| (u[i] - mean[i]).powi(2)));
                (ss / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    (mean, se)
}

fn pairwise_sum(it: impl Iterator<Item = f64>) -> f64 {
    fn rec(v: &[f64]) -> f64 {
        if v.len() <= 8 {
            v.iter().sum()
        } else {
            let (a, b) = v.split_at(v.len() / 2);
            rec(a) + rec(b)
        }
    }
    rec(&it.collect::<Vec<_>>())
}

/// Permutation sampling: `φᵢ` is the average over `M` random orderings of
/// `v(prefix ∪ {i}) − v(prefix)`.
pub fn permutation_shapley(
    vf: &dyn ValueFunction,
    x: &[f64],
    n_permutations: usize,
    rng: &RngStream,
) -> Result<Attribution> {
    permutation_shapley_with(vf, x, n_permutations, rng, &PermutationOptions::default())
}

pub fn permutation_shapley_with(
    vf: &dyn ValueFunction,
    x: &[f64],
    n_permutations: usize,
    rng: &RngStream,
    opts: &PermutationOptions,
) -> Result<Attribution> {
    let d = check_x(vf.dim(), x)?;
    Coalition::full(d).check_within(d)?;
    let plan = PermutationPlan::new(d, n_permutations, rng, opts.antithetic)?;
    let mut needed: Vec<Coalition> = plan
        .permutations()
        .iter()
        .flat_map(|p| {
            let mut s = Coalition::EMPTY;
            std::iter::once(s).chain(p.iter().map(move |&i| {
                s = s.with(i);
                s
            }))
        })
        .collect();
    needed.sort_unstable();
    needed.dedup();
    let base = values_stream(rng);
    let evaluated = needed
        .par_iter()
        .map(|&s| vf.value(s, x, &mut base.clone()).map(|e| (s, e.value)))
        .collect::<Result<Vec<_>>>()?;
    let cache: HashMap<Coalition, f64> = evaluated.into_iter().collect();
    let contrib: Vec<Vec<f64>> = plan
        .permutations()
        .iter()
        .map(|p| {
            let mut row = vec![0.0; d];
            let mut s = Coalition::EMPTY;
            for &i in p {
                let t = s.with(i);
                row[i] = cache[&t] - cache[&s];
                s = t;
            }
            row
        })
        .collect();
    let (phi, se) = summarize(&contrib, d, plan.group());
    let mut a = Attribution::new(phi, cache[&Coalition::EMPTY], cache[&Coalition::full(d)]);
    a.n_samples = plan.len();
    a.std_errors = Some(se);
    Ok(a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldPermutationOptions {
    /// Run the per-feature loops separately instead of sharing one
    /// permutation pass across all features.
    pub per_feature: bool,
    /// Rejection draws allowed for one accepted sample.
    pub max_attempts: usize,
}

impl Default for ManifoldPermutationOptions {
    fn default() -> Self {
        ManifoldPermutationOptions {
            per_feature: false,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// One interventional draw for `S` that lands inside the manifold.
fn accepted_draw(
    sampler: &dyn CoalitionSampler,
    manifold: &dyn Manifold,
    s: Coalition,
    x: &[f64],
    out: &mut [f64],
    rng: &mut RngStream,
    max_attempts: usize,
) -> Result<()> {
    if s == Coalition::full(x.len()) {
        out.copy_from_slice(x);
        return Ok(());
    }
    let bound = sampler.bind(s, x)?;
    for _ in 0..max_attempts {
        bound.draw(out, rng);
        if manifold.contains(out) {
            return Ok(());
        }
    }
    Err(Error::AcceptanceFailure {
        coalition: s,
        attempts: max_attempts,
    })
}

/// Permutation estimator of ManifoldShap by rejection sampling: each prefix
/// coalition gets one interventional sample accepted into the manifold.
///
/// The model is evaluated only at accepted samples, so models that agree on
/// the manifold produce identical attributions for the same stream.
pub fn manifold_permutation_shapley(
    model: &dyn Model,
    manifold: &dyn Manifold,
    interventional: &dyn CoalitionSampler,
    x: &[f64],
    n_permutations: usize,
    rng: &RngStream,
) -> Result<Attribution> {
    manifold_permutation_shapley_with(
        model,
        manifold,
        interventional,
        x,
        n_permutations,
        rng,
        &ManifoldPermutationOptions::default(),
    )
}

pub fn manifold_permutation_shapley_with(
    model: &dyn Model,
    manifold: &dyn Manifold,
    interventional: &dyn CoalitionSampler,
    x: &[f64],
    n_permutations: usize,
    rng: &RngStream,
    opts: &ManifoldPermutationOptions,
) -> Result<Attribution> {
    let d = check_x(interventional.dim(), x)?;
    Coalition::full(d).check_within(d)?;
    if !manifold.contains(x) {
        return Err(Error::OutsideManifold);
    }
    if opts.max_attempts == 0 {
        return Err(Error::Domain("max_attempts must be at least 1".into()));
    }
    let plan = PermutationPlan::new(d, n_permutations, rng, false)?;
    let draws = rng.child(tag::VALUES);
    let fx = model.eval(x);
    let rows = plan
        .permutations()
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut r = draws.child(k as u64);
            let mut y = vec![0.0; d];
            let mut row = vec![0.0; d];
            if opts.per_feature {
                let mut empty_f = None;
                for (pos, &i) in p.iter().enumerate() {
                    let s = Coalition::from_indices(p[..pos].iter().copied());
                    accepted_draw(interventional, manifold, s.with(i), x, &mut y, &mut r, opts.max_attempts)?;
                    let with = model.eval(&y);
                    accepted_draw(interventional, manifold, s, x, &mut y, &mut r, opts.max_attempts)?;
                    let without = model.eval(&y);
                    if pos == 0 {
                        empty_f = Some(without);
                    }
                    row[i] = with - without;
                }
                Ok((row, empty_f.unwrap_or(fx)))
            } else {
                let mut s = Coalition::EMPTY;
                accepted_draw(interventional, manifold, s, x, &mut y, &mut r, opts.max_attempts)?;
                let mut prev = model.eval(&y);
                let empty_f = prev;
                for &i in p {
                    s = s.with(i);
                    accepted_draw(interventional, manifold, s, x, &mut y, &mut r, opts.max_attempts)?;
                    let cur = model.eval(&y);
                    row[i] = cur - prev;
                    prev = cur;
                }
                Ok((row, empty_f))
            }
        })
        .collect::<Result<Vec<(Vec<f64>, f64)>>>()?;
    let v_empty = pairwise_sum(rows.iter().map(|r| r.1)) / rows.len() as f64;
    let contrib: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let (phi, se) = summarize(&contrib, d, 1);
    let mut a = Attribution::new(phi, v_empty, fx);
    a.n_samples = plan.len();
    a.std_errors = Some(se);
    Ok(a)
}

/// Dispatch helper for a value function under the exact or permutation engine.
pub fn attribute(
    engine: EngineKind,
    vf: &dyn ValueFunction,
    x: &[f64],
    n_permutations: usize,
    rng: &RngStream,
) -> Result<Attribution> {
    match engine {
        EngineKind::Exact => exact_shapley(vf, x, rng),
        EngineKind::Permutation => permutation_shapley(vf, x, n_permutations, rng),
        EngineKind::ManifoldPermutation => Err(Error::Config(
            "the manifold-permutation engine takes a model, manifold and sampler, not a value function".into(),
        )),
    }
}
