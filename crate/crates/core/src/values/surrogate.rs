use std::sync::Arc;

use rand::Rng;

use super::{ValueEstimate, ValueFunction};
use crate::coalition::Coalition;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    /// Training pairs drawn.
    pub n_coalition_draws: usize,
    /// Neighbours averaged per query.
    pub k: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            n_coalition_draws: 20_000,
            k: 100,
        }
    }
}

/// Masked-input regression `g(x_S, S) ≈ E[f(X) | X_S = x_S]`.
///
/// Training pairs `((x_S, S), f(x))` use rows drawn uniformly and coalitions
/// drawn with Shapley weights over `S ⊊ [d]`. A query with coalition `S` is
/// answered by the `k` nearest training rows whose mask covers `S`, distance
/// measured on the `S` coordinates only. Masked-out coordinates are never
/// read, which is what a reserved mask code achieves in a dense encoding.
#[derive(Clone)]
pub struct CesSurrogate {
    model: Arc<dyn Model>,
    d: usize,
    k: usize,
    rows: Vec<f64>,
    masks: Vec<Coalition>,
    targets: Vec<f64>,
}

/// Draw a coalition `S ⊊ [d]` with probability proportional to its Shapley
/// weight: the size has mass `∝ 1/(d − s)`, then a uniform subset of it.
fn shapley_coalition(d: usize, rng: &mut RngStream) -> Coalition {
    let total: f64 = (0..d).map(|s| 1.0 / (d - s) as f64).sum();
    let mut u = rng.gen::<f64>() * total;
    let mut size = d - 1;
    for s in 0..d {
        let w = 1.0 / (d - s) as f64;
        if u < w {
            size = s;
            break;
        }
        u -= w;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    for i in 0..size {
        let j = rng.gen_range(i..d);
        idx.swap(i, j);
    }
    Coalition::from_indices(idx[..size].iter().copied())
}

pub fn fit_ces_surrogate(
    model: Arc<dyn Model>,
    data: &Dataset,
    params: &SurrogateParams,
    rng: &mut RngStream,
) -> Result<CesSurrogate> {
    if data.n_rows() < 10 {
        return Err(Error::Domain(format!(
            "surrogate needs at least 10 rows, got {}",
            data.n_rows()
        )));
    }
    if params.k == 0 || params.n_coalition_draws == 0 {
        return Err(Error::Config("surrogate k and n_coalition_draws must be positive".into()));
    }
    let d = data.dim();
    Coalition::full(d).check_within(d)?;
    let n = params.n_coalition_draws;
    let mut rows = Vec::with_capacity(n * d);
    let mut masks = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let row = data.row(rng.gen_range(0..data.n_rows()));
        let mask = shapley_coalition(d, rng);
        targets.push(model.eval(row));
        rows.extend_from_slice(row);
        masks.push(mask);
    }
    Ok(CesSurrogate {
        model,
        d,
        k: params.k,
        rows,
        masks,
        targets,
    })
}

impl CesSurrogate {
    pub fn n_pairs(&self) -> usize {
        self.targets.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `g(x_S, S)`; the full coalition returns `f(x)`.
    pub fn predict(&self, coalition: Coalition, x: &[f64]) -> Result<f64> {
        if x.len() != self.d {
            return Err(Error::Dimension { expected: self.d, got: x.len() });
        }
        coalition.check_within(self.d)?;
        if coalition == Coalition::full(self.d) {
            return Ok(self.model.eval(x));
        }
        let idx: Vec<usize> = coalition.iter().collect();
        let mut cand: Vec<(f64, usize)> = self
            .masks
            .iter()
            .enumerate()
            .filter(|(_, m)| coalition.is_subset_of(**m))
            .map(|(i, _)| {
                let row = &self.rows[i * self.d..(i + 1) * self.d];
                let dist: f64 = idx.iter().map(|&j| (row[j] - x[j]).powi(2)).sum();
                (dist, i)
            })
            .collect();
        if cand.is_empty() {
            return Err(Error::Domain(format!("no surrogate training pairs cover coalition {coalition}")));
        }
        if coalition.is_empty() {
            return Ok(cand.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / cand.len() as f64);
        }
        let k = self.k.min(cand.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, cmp);
        }
        Ok(cand[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64)
    }
}

impl ValueFunction for CesSurrogate {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, coalition: Coalition, x: &[f64], _rng: &mut RngStream) -> Result<ValueEstimate> {
        self.predict(coalition, x).map(ValueEstimate::exact)
    }
}
