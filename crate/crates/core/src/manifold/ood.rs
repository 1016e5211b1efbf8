use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Manifold;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Hyperparameters for the perturbation-trained OOD classifier. Defaults
/// separate 3σ perturbations on half of the features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OodParams {
    pub n_perturbed_per_point: usize,
    pub perturb_fraction: f64,
    pub perturb_scale: f64,
    pub k: usize,
}

impl Default for OodParams {
    fn default() -> Self {
        OodParams {
            n_perturbed_per_point: 1,
            perturb_fraction: 0.5,
            perturb_scale: 3.0,
            k: 5,
        }
    }
}

/// k-nearest-neighbour vote between real rows (in) and perturbed copies
/// (out), in z-scored Euclidean distance.
#[derive(Clone, Debug)]
pub struct OodClassifier {
    points: Vec<f64>,
    labels: Vec<bool>,
    d: usize,
    center: Vec<f64>,
    scale: Vec<f64>,
    k: usize,
}

pub fn fit_ood_classifier(data: &Dataset, params: &OodParams, rng: &mut RngStream) -> Result<OodClassifier> {
    let (n, d) = (data.n_rows(), data.dim());
    if params.n_perturbed_per_point == 0 {
        return Err(Error::Domain("n_perturbed_per_point must be >= 1 to have an out class".into()));
    }
    if !(params.perturb_fraction > 0.0 && params.perturb_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "perturb_fraction must lie in (0, 1], got {}",
            params.perturb_fraction
        )));
    }
    if !(params.perturb_scale > 0.0) {
        return Err(Error::Domain("perturb_scale must be positive".into()));
    }
    let train_size = n * (1 + params.n_perturbed_per_point);
    if params.k == 0 || params.k > train_size || n < params.k {
        return Err(Error::Domain(format!(
            "k = {} is invalid for {n} rows ({train_size} training points)",
            params.k
        )));
    }
    let center = data.column_means();
    let scale: Vec<f64> = data
        .column_stds()
        .into_iter()
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    let n_shift = ((params.perturb_fraction * d as f64).ceil() as usize).clamp(1, d);

    let mut points = Vec::with_capacity(train_size * d);
    let mut labels = Vec::with_capacity(train_size);
    for row in data.rows() {
        points.extend(row.iter().zip(&center).zip(&scale).map(|((v, c), s)| (v - c) / s));
        labels.push(true);
        for _ in 0..params.n_perturbed_per_point {
            let mut z: Vec<f64> = row.iter().zip(&center).zip(&scale).map(|((v, c), s)| (v - c) / s).collect();
            // In z-scored units a shift of 𝒩(0, scale²σⱼ²) is 𝒩(0, scale²).
            for j in sample_indices(rng, d, n_shift) {
                let e: f64 = rng.sample(StandardNormal);
                z[j] += params.perturb_scale * e;
            }
            points.extend(z);
            labels.push(false);
        }
    }
    Ok(OodClassifier {
        points,
        labels,
        d,
        center,
        scale,
        k: params.k,
    })
}

impl OodClassifier {
    pub(crate) fn from_parts(
        points: Vec<f64>,
        labels: Vec<bool>,
        center: Vec<f64>,
        scale: Vec<f64>,
        k: usize,
    ) -> Result<Self> {
        let d = center.len();
        if d == 0 || scale.len() != d || points.len() != labels.len() * d || k == 0 || k > labels.len() {
            return Err(Error::Domain("inconsistent OOD classifier parameters".into()));
        }
        Ok(OodClassifier { points, labels, d, center, scale, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Training points in z-scored coordinates with their in/out labels.
    pub fn training(&self) -> impl Iterator<Item = (&[f64], bool)> {
        self.points.chunks_exact(self.d).zip(self.labels.iter().copied())
    }

    /// Share of the `k` nearest training points labelled "in".
    pub fn in_vote(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().zip(&self.center).zip(&self.scale).map(|((v, c), s)| (v - c) / s).collect();
        // Bounded max-heap of (distance, label) via a sorted small vector.
        let mut best: Vec<(f64, bool)> = Vec::with_capacity(self.k + 1);
        for (p, &label) in self.points.chunks_exact(self.d).zip(&self.labels) {
            let dist: f64 = p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() < self.k || dist < best[best.len() - 1].0 {
                let pos = best.partition_point(|(d, _)| *d <= dist);
                best.insert(pos, (dist, label));
                best.truncate(self.k);
            }
        }
        best.iter().filter(|(_, l)| *l).count() as f64 / self.k as f64
    }
}

impl Manifold for OodClassifier {
    /// Strict majority of "in" votes.
    fn contains(&self, x: &[f64]) -> bool {
        self.in_vote(x) > 0.5
    }
}
