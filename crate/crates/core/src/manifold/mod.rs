//! Restriction sets `𝒵`: density superlevel sets, mass-calibrated superlevel
//! sets, and classifier-defined regions.
//!
//! `𝒟_ε = {x : p(x) > ε}` is open for continuous densities, so every strict
//! threshold set built here is treated as satisfying the openness premise of
//! the restricted value function. Nothing certifies this for arbitrary
//! user-supplied density estimates.

mod kde;
mod ood;
mod persist;

use std::sync::Arc;

pub use kde::{fit_kde, Bandwidth, KdeEstimator};
pub use ood::{fit_ood_classifier, OodClassifier, OodParams};
pub use persist::{read_manifold_file, write_manifold_file, ManifoldFile};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub trait Density: Send + Sync {
    fn density(&self, x: &[f64]) -> f64;
}

impl<D: Density + ?Sized> Density for Arc<D> {
    fn density(&self, x: &[f64]) -> f64 {
        (**self).density(x)
    }
}

pub type SharedDensity = Arc<dyn Density>;

pub trait Manifold: Send + Sync {
    fn contains(&self, x: &[f64]) -> bool;
}

impl<M: Manifold + ?Sized> Manifold for Arc<M> {
    fn contains(&self, x: &[f64]) -> bool {
        (**self).contains(x)
    }
}

pub type SharedManifold = Arc<dyn Manifold>;

/// Free-function form of [`Manifold::contains`].
pub fn contains(manifold: &dyn Manifold, x: &[f64]) -> bool {
    manifold.contains(x)
}

/// All of `ℝᵈ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullSpace;

impl Manifold for FullSpace {
    fn contains(&self, _x: &[f64]) -> bool {
        true
    }
}

/// `{x : p(x) > ε}`. Points with `p(x) = ε` exactly are outside.
#[derive(Clone)]
pub struct DensityManifold {
    density: SharedDensity,
    epsilon: f64,
}

impl DensityManifold {
    pub fn new(density: SharedDensity, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Domain(format!("density threshold must be finite and >= 0, got {epsilon}")));
        }
        Ok(DensityManifold { density, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn density(&self) -> &SharedDensity {
        &self.density
    }
}

impl Manifold for DensityManifold {
    fn contains(&self, x: &[f64]) -> bool {
        self.density.density(x) > self.epsilon
    }
}

/// A density manifold whose threshold was calibrated to hold mass `α`.
#[derive(Clone)]
pub struct MassManifold {
    inner: DensityManifold,
    alpha: f64,
}

impl MassManifold {
    /// Calibrate `ε⁽ᵅ⁾` on `calibration`, which must not overlap the data the
    /// density was fitted on.
    pub fn calibrate(density: SharedDensity, calibration: &Dataset, alpha: f64) -> Result<Self> {
        let epsilon = threshold_for_mass(density.as_ref(), calibration, alpha)?;
        Ok(MassManifold {
            inner: DensityManifold::new(density, epsilon)?,
            alpha,
        })
    }

    pub fn from_parts(density: SharedDensity, epsilon: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(MassManifold {
            inner: DensityManifold::new(density, epsilon)?,
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    pub fn as_density_manifold(&self) -> &DensityManifold {
        &self.inner
    }
}

impl Manifold for MassManifold {
    fn contains(&self, x: &[f64]) -> bool {
        self.inner.contains(x)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mass alpha must lie in (0, 1], got {alpha}")))
    }
}

/// Empirical `(1 − α)`-quantile of the density over calibration points.
/// `α = 1` gives `0`.
///
/// The quantile is the `⌊(1 − α)·n⌋`-th smallest value (0-based), so at least
/// `⌈α·n⌉` calibration points have density at or above it. Ties at the
/// threshold fall outside under the strict comparison in
/// [`DensityManifold::contains`].
pub fn threshold_for_mass(density: &dyn Density, calibration: &Dataset, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = calibration.n_rows();
    if n == 0 {
        return Err(Error::Domain("calibration set is empty".into()));
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let mut values: Vec<f64> = calibration.rows().map(|r| density.density(r)).collect();
    values.sort_by(f64::total_cmp);
    let k = (((1.0 - alpha) * n as f64).floor() as usize).min(n - 1);
    Ok(values[k])
}

/// Fraction of rows inside `manifold`.
pub fn empirical_mass(manifold: &dyn Manifold, data: &Dataset) -> f64 {
    let inside = data.rows().filter(|r| manifold.contains(r)).count();
    inside as f64 / data.n_rows() as f64
}

/// Indices of the cells a mass threshold keeps on a discretized density:
/// the highest-mass cells, in decreasing order, until their total reaches
/// `α`, plus any cell tied with the last one kept.
pub fn mass_manifold_cells(cell_mass: &[f64], alpha: f64) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    let mut order: Vec<usize> = (0..cell_mass.len()).collect();
    order.sort_by(|&a, &b| cell_mass[b].total_cmp(&cell_mass[a]).then(a.cmp(&b)));
    let total: f64 = cell_mass.iter().sum();
    let mut acc = 0.0;
    let mut kept = Vec::new();
    for (pos, &c) in order.iter().enumerate() {
        kept.push(c);
        acc += cell_mass[c];
        if acc >= alpha * total - 1e-15 {
            let last = cell_mass[c];
            kept.extend(order[pos + 1..].iter().take_while(|&&o| cell_mass[o] == last));
            break;
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::MultivariateNormal;
    use crate::rng::RngStream;
    use crate::scm;

    fn std_normal() -> SharedDensity {
        Arc::new(MultivariateNormal::standard(2))
    }

    #[test]
    fn contains_examples() {
        let m = DensityManifold::new(std_normal(), 1e-3).unwrap();
        assert!(m.contains(&[0.0, 0.0]));
        assert!(!m.contains(&[10.0, 10.0]));
        let full = DensityManifold::new(std_normal(), 0.0).unwrap();
        assert!(full.contains(&[5.0, -5.0]));
    }

    #[test]
    fn tie_at_threshold_is_outside() {
        let p0 = 1.0 / (2.0 * std::f64::consts::PI);
        let m = DensityManifold::new(std_normal(), p0).unwrap();
        assert!(!m.contains(&[0.0, 0.0]));
    }

    #[test]
    fn alpha_one_gives_zero_threshold() {
        let data = Dataset::unnamed(vec![0.0, 0.0, 1.0, 1.0], 2).unwrap();
        assert_eq!(threshold_for_mass(std_normal().as_ref(), &data, 1.0).unwrap(), 0.0);
        assert!(threshold_for_mass(std_normal().as_ref(), &data, 0.0).is_err());
        assert!(threshold_for_mass(std_normal().as_ref(), &data, 1.5).is_err());
    }

    #[test]
    fn oracle_threshold_closed_form() {
        // For the standard bivariate normal, P(p(X) >= e) = 1 - 2πe.
        let scm = scm::make_indep_gaussian_2d().unwrap();
        let cal = scm.sample_observational(100_000, &mut RngStream::new(11)).unwrap();
        for alpha in [0.99, 0.9] {
            let eps = threshold_for_mass(std_normal().as_ref(), &cal, alpha).unwrap();
            let expect = (1.0 - alpha) / (2.0 * std::f64::consts::PI);
            assert!((eps / expect - 1.0).abs() < 0.15, "alpha {alpha}: {eps} vs {expect}");
        }
    }

    #[test]
    fn mass_cells_take_densest_first() {
        let mass = [0.1, 0.4, 0.2, 0.3];
        assert_eq!(mass_manifold_cells(&mass, 0.7).unwrap(), vec![1, 3]);
        assert_eq!(mass_manifold_cells(&mass, 0.71).unwrap(), vec![1, 3, 2]);
        assert_eq!(mass_manifold_cells(&mass, 1.0).unwrap().len(), 4);
    }
}
