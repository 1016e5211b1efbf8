use rayon::prelude::*;

use super::Density;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Bandwidth {
    /// `hⱼ = σ̂ⱼ · n^(−1/(d+4))`.
    Scott,
    /// `hⱼ = σ̂ⱼ · (4 / (n (d+2)))^(1/(d+4))`.
    Silverman,
    Fixed(Vec<f64>),
}

/// Product-Gaussian kernel density estimate with per-dimension bandwidths.
#[derive(Clone, Debug)]
pub struct KdeEstimator {
    points: Vec<f64>,
    n: usize,
    d: usize,
    bandwidth: Vec<f64>,
    inv_bandwidth: Vec<f64>,
    log_norm: f64,
}

pub fn fit_kde(data: &Dataset, rule: &Bandwidth) -> Result<KdeEstimator> {
    let (n, d) = (data.n_rows(), data.dim());
    let bandwidth = match rule {
        Bandwidth::Fixed(h) => {
            if h.len() != d {
                return Err(Error::Dimension { expected: d, got: h.len() });
            }
            if h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Domain("bandwidths must be positive".into()));
            }
            h.clone()
        }
        Bandwidth::Scott | Bandwidth::Silverman => {
            if n < 2 {
                return Err(Error::Domain("bandwidth rules need at least 2 rows".into()));
            }
            let factor = match rule {
                Bandwidth::Scott => (n as f64).powf(-1.0 / (d as f64 + 4.0)),
                _ => (4.0 / (n as f64 * (d as f64 + 2.0))).powf(1.0 / (d as f64 + 4.0)),
            };
            let stds = data.column_stds();
            if let Some(j) = stds.iter().position(|s| *s <= 0.0) {
                return Err(Error::Domain(format!(
                    "feature {:?} has zero variance; add a small jitter or pass a fixed bandwidth",
                    data.feature_names()[j]
                )));
            }
            stds.iter().map(|s| s * factor).collect()
        }
    };
    Ok(KdeEstimator::from_parts(data.as_flat().to_vec(), d, bandwidth))
}

impl KdeEstimator {
    pub(crate) fn from_parts(points: Vec<f64>, d: usize, bandwidth: Vec<f64>) -> Self {
        let n = points.len() / d;
        let log_det: f64 = bandwidth.iter().map(|h| h.ln()).sum();
        let log_norm = -(n as f64).ln() - log_det - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln();
        KdeEstimator {
            inv_bandwidth: bandwidth.iter().map(|h| 1.0 / h).collect(),
            points,
            n,
            d,
            bandwidth,
            log_norm,
        }
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn reference_points(&self) -> &[f64] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// Log-sum-exp over kernels, so far-away queries do not underflow early.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for p in self.points.chunks_exact(self.d) {
            let mut q = 0.0;
            for j in 0..self.d {
                let z = (x[j] - p[j]) * self.inv_bandwidth[j];
                q += z * z;
            }
            let e = -0.5 * q;
            if e <= max {
                sum += (e - max).exp();
            } else {
                sum = sum * (max - e).exp() + 1.0;
                max = e;
            }
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        self.log_norm + max + sum.ln()
    }

    /// Densities for many query rows, evaluated in parallel.
    pub fn density_many(&self, queries: &Dataset) -> Vec<f64> {
        let rows: Vec<&[f64]> = queries.rows().collect();
        rows.par_iter().map(|r| self.density(r)).collect()
    }
}

impl Density for KdeEstimator {
    fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::scm;
    use approx::assert_relative_eq;

    #[test]
    fn single_kernel_at_origin() {
        let data = Dataset::unnamed(vec![0.0, 0.0], 2).unwrap();
        let kde = fit_kde(&data, &Bandwidth::Fixed(vec![1.0, 1.0])).unwrap();
        assert_relative_eq!(kde.density(&[0.0, 0.0]), 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-12);
    }

    #[test]
    fn standard_normal_sample_density_at_origin() {
        let data = scm::make_indep_gaussian_2d()
            .unwrap()
            .sample_observational(10_000, &mut RngStream::new(1))
            .unwrap();
        let kde = fit_kde(&data, &Bandwidth::Scott).unwrap();
        assert!((kde.density(&[0.0, 0.0]) - 0.159).abs() < 0.02);
    }

    #[test]
    fn symmetric_sample_gives_symmetric_density() {
        let base = scm::make_dag_scm(0.5)
            .unwrap()
            .sample_observational(500, &mut RngStream::new(2))
            .unwrap();
        let mut vals = base.as_flat().to_vec();
        vals.extend(base.as_flat().iter().map(|v| -v));
        let data = Dataset::unnamed(vals, 2).unwrap();
        let kde = fit_kde(&data, &Bandwidth::Scott).unwrap();
        for x in [[0.3, 0.1], [1.5, -0.7], [-2.0, -1.0]] {
            let neg = [-x[0], -x[1]];
            assert!((kde.density(&x) - kde.density(&neg)).abs() < 0.01);
        }
    }

    #[test]
    fn integrates_to_one_on_grid() {
        for d in [1usize, 2] {
            let data = scm::make_equicorrelated(2, 0.6)
                .unwrap()
                .sample_observational(300, &mut RngStream::new(3))
                .unwrap();
            let data = if d == 1 { Dataset::unnamed(data.column(0), 1).unwrap() } else { data };
            let kde = fit_kde(&data, &Bandwidth::Scott).unwrap();
            let (lo, hi, k) = (-7.0, 7.0, 200usize);
            let h = (hi - lo) / k as f64;
            let mut total = 0.0;
            if d == 1 {
                for a in 0..k {
                    total += kde.density(&[lo + (a as f64 + 0.5) * h]) * h;
                }
            } else {
                for a in 0..k {
                    for b in 0..k {
                        let x = [lo + (a as f64 + 0.5) * h, lo + (b as f64 + 0.5) * h];
                        total += kde.density(&x) * h * h;
                    }
                }
            }
            assert!((total - 1.0).abs() < 0.02, "d = {d}: {total}");
        }
    }

    #[test]
    fn zero_variance_feature_rejected() {
        let data = Dataset::unnamed(vec![1.0, 0.0, 1.0, 1.0, 1.0, 2.0], 2).unwrap();
        let err = fit_kde(&data, &Bandwidth::Scott).unwrap_err();
        assert!(err.to_string().contains("jitter"));
        assert!(fit_kde(&data, &Bandwidth::Fixed(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn far_query_is_zero_not_nan() {
        let data = Dataset::unnamed(vec![0.0, 1.0], 1).unwrap();
        let kde = fit_kde(&data, &Bandwidth::Fixed(vec![0.1])).unwrap();
        assert_eq!(kde.density(&[1e6]), 0.0);
    }
}
