use std::sync::Arc;

use mshap::manifold::{empirical_mass, mass_manifold_cells, threshold_for_mass, MassManifold};
use mshap::{scm, Density, Manifold, MultivariateNormal, RngStream};
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn mass_manifold_holds_its_mass_on_fresh_data() {
    let scm = scm::make_dag_scm(0.85).unwrap();
    let density: Arc<dyn Density> = Arc::new(scm.density().unwrap());
    let cal = scm.sample_observational(10_000, &mut RngStream::new(1)).unwrap();
    let fresh = scm.sample_observational(10_000, &mut RngStream::new(2)).unwrap();
    for alpha in [0.8, 0.9, 0.99] {
        let z = MassManifold::calibrate(density.clone(), &cal, alpha).unwrap();
        let got = empirical_mass(&z, &fresh);
        assert!((got - alpha).abs() <= 0.02, "alpha {alpha}: mass {got}");
    }
}

#[test]
fn smaller_mass_gives_nested_manifolds() {
    let scm = scm::make_sine_scm().unwrap();
    let density: Arc<dyn Density> = Arc::new(scm.density().unwrap());
    let cal = scm.sample_observational(5000, &mut RngStream::new(3)).unwrap();
    let probes = scm.sample_observational(1000, &mut RngStream::new(4)).unwrap();
    let alphas = [0.5, 0.8, 0.9, 0.99, 1.0];
    let eps: Vec<f64> = alphas.iter().map(|&a| threshold_for_mass(density.as_ref(), &cal, a).unwrap()).collect();
    let zs: Vec<MassManifold> = alphas
        .iter()
        .zip(&eps)
        .map(|(&a, &e)| MassManifold::from_parts(density.clone(), e, a).unwrap())
        .collect();
    for k in 1..alphas.len() {
        assert!(eps[k - 1] >= eps[k]);
        for x in probes.rows() {
            assert!(!zs[k - 1].contains(x) || zs[k].contains(x));
        }
    }
}

#[test]
fn bivariate_normal_threshold_matches_closed_form() {
    let density = MultivariateNormal::standard(2);
    let cal = scm::make_indep_gaussian_2d()
        .unwrap()
        .sample_observational(100_000, &mut RngStream::new(5))
        .unwrap();
    for alpha in [0.8, 0.9, 0.99] {
        let eps = threshold_for_mass(&density, &cal, alpha).unwrap();
        let expect = (1.0 - alpha) / (2.0 * std::f64::consts::PI);
        assert!((eps / expect - 1.0).abs() < 0.15, "alpha {alpha}: {eps} vs {expect}");
    }
}

/// Cell probabilities of `𝒩(0, I₂)` on an `nx × ny` grid over an
/// off-centre window, so no two cells carry the same mass.
fn grid_mass(nx: usize, ny: usize) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let edges = |k: usize, lo: f64| -> Vec<f64> { (0..=k).map(|i| lo + 4.0 * i as f64 / k as f64).collect() };
    let (ex, ey) = (edges(nx, -1.7), edges(ny, -2.15));
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let px = n.cdf(ex[i + 1]) - n.cdf(ex[i]);
            let py = n.cdf(ey[j + 1]) - n.cdf(ey[j]);
            out.push(px * py);
        }
    }
    out
}

#[test]
fn mass_manifold_uses_fewest_cells() {
    for (nx, ny) in [(4, 4), (5, 4)] {
        let mass = grid_mass(nx, ny);
        let mut sorted = mass.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9), "grid has tied cells");
        let total: f64 = mass.iter().sum();
        let n = mass.len();
        for alpha in [0.3, 0.5, 0.8, 0.9, 0.97] {
            let kept = mass_manifold_cells(&mass, alpha).unwrap();
            let kept_mass: f64 = kept.iter().map(|&c| mass[c]).sum();
            assert!(kept_mass >= alpha * total - 1e-12);
            let mut best = usize::MAX;
            for subset in 0u32..(1 << n) {
                let count = subset.count_ones() as usize;
                if count >= best {
                    continue;
                }
                let m: f64 = (0..n).filter(|&c| subset >> c & 1 == 1).map(|c| mass[c]).sum();
                if m >= alpha * total - 1e-12 {
                    best = count;
                }
            }
            assert_eq!(best, kept.len(), "{nx}x{ny} alpha {alpha}");
        }
    }
}
