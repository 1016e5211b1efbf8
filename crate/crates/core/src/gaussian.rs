//! Multivariate normal densities and analytic Gaussian conditionals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::manifold::Density;
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct MultivariateNormal {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl MultivariateNormal {
    /// `cov` is row-major `d × d`.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.len() != d * d {
            return Err(Error::Dimension {
                expected: d * d,
                got: cov.len(),
            });
        }
        let cov = DMatrix::from_row_slice(d, d, &cov);
        if (&cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
            return Err(Error::Domain("covariance is not symmetric".into()));
        }
        let chol = Cholesky::new(cov.clone()).ok_or(Error::Singular)?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(MultivariateNormal {
            mean: DVector::from_vec(mean),
            cov,
            precision,
            log_norm,
        })
    }

    pub fn standard(d: usize) -> Self {
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = 1.0;
        }
        Self::new(vec![0.0; d], cov).expect("identity covariance is SPD")
    }

    /// Unit variances with correlation `rho` between every pair.
    pub fn equicorrelated(d: usize, rho: f64) -> Result<Self> {
        let mut cov = vec![rho; d * d];
        for i in 0..d {
            cov[i * d + i] = 1.0;
        }
        Self::new(vec![0.0; d], cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Row-major covariance.
    pub fn covariance(&self) -> Vec<f64> {
        self.cov.transpose().as_slice().to_vec()
    }

    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for a in 0..d {
            let ea = x[a] - self.mean[a];
            let mut row = 0.0;
            for b in 0..d {
                row += self.precision[(a, b)] * (x[b] - self.mean[b]);
            }
            total += ea * row;
        }
        total
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    /// Analytic law of `X_S̄ | X_S = x_S`.
    pub fn condition(&self, coalition: Coalition, x: &[f64]) -> Result<GaussianConditional> {
        GaussianConditional::new(self, coalition, x)
    }
}

impl Density for MultivariateNormal {
    fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }
}

/// `𝒩(μ_S̄ + Σ_S̄S Σ_SS⁻¹ (x_S − μ_S), Σ_S̄S̄ − Σ_S̄S Σ_SS⁻¹ Σ_SS̄)`, stored with
/// a Cholesky factor so draws cost one triangular product.
#[derive(Clone, Debug)]
pub struct GaussianConditional {
    coalition: Coalition,
    fixed: Vec<f64>,
    free: Vec<usize>,
    cond_mean: DVector<f64>,
    cond_chol: DMatrix<f64>,
}

impl GaussianConditional {
    pub fn new(mvn: &MultivariateNormal, coalition: Coalition, x: &[f64]) -> Result<Self> {
        let d = mvn.dim();
        coalition.check_within(d)?;
        if x.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        let given: Vec<usize> = coalition.iter().collect();
        let free: Vec<usize> = coalition.complement(d).iter().collect();
        let sub = |rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |a, b| mvn.cov[(rows[a], cols[b])])
        };
        let cov_ff = sub(&free, &free);
        let (cond_mean, cond_cov) = if given.is_empty() {
            (
                DVector::from_iterator(free.len(), free.iter().map(|&j| mvn.mean[j])),
                cov_ff,
            )
        } else {
            let cov_gg = sub(&given, &given);
            let cov_fg = sub(&free, &given);
            let chol = Cholesky::new(cov_gg).ok_or(Error::Singular)?;
            let resid =
                DVector::from_iterator(given.len(), given.iter().map(|&j| x[j] - mvn.mean[j]));
            let shift = &cov_fg * chol.solve(&resid);
            let mean = DVector::from_iterator(
                free.len(),
                free.iter().enumerate().map(|(a, &j)| mvn.mean[j] + shift[a]),
            );
            let cov = &cov_ff - &cov_fg * chol.solve(&cov_fg.transpose());
            (mean, cov)
        };
        let cond_chol = if free.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            // Symmetrize against rounding before factoring.
            let sym = (&cond_cov + cond_cov.transpose()) * 0.5;
            Cholesky::<f64, Dyn>::new(sym).ok_or(Error::Singular)?.unpack()
        };
        Ok(GaussianConditional {
            coalition,
            fixed: x.to_vec(),
            free,
            cond_mean,
            cond_chol,
        })
    }

    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    /// Conditional mean of the free coordinates, in index order.
    pub fn mean(&self) -> &[f64] {
        self.cond_mean.as_slice()
    }

    /// Conditional covariance of the free coordinates, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let c = &self.cond_chol * self.cond_chol.transpose();
        c.transpose().as_slice().to_vec()
    }

    /// Fill `out` with a full row: coalition coordinates at `x_S`, the rest
    /// drawn from the conditional. Always consumes `d` normal draws so that
    /// coalitions sharing a stream see common random numbers.
    pub fn draw_into(&self, out: &mut [f64], rng: &mut RngStream) {
        let d = self.fixed.len();
        out.copy_from_slice(&self.fixed);
        let mut z = [0.0f64; 64];
        for zi in z.iter_mut().take(d) {
            *zi = rng.sample(StandardNormal);
        }
        for (a, &j) in self.free.iter().enumerate() {
            let mut v = self.cond_mean[a];
            for b in 0..=a {
                v += self.cond_chol[(a, b)] * z[b];
            }
            out[j] = v;
        }
    }
}

/// `n` full rows drawn from the conditional (coalition coordinates fixed).
pub fn gaussian_conditional_sample(
    cond: &GaussianConditional,
    n: usize,
    rng: &mut RngStream,
) -> Vec<Vec<f64>> {
    let d = cond.fixed.len();
    (0..n)
        .map(|_| {
            let mut row = vec![0.0; d];
            cond.draw_into(&mut row, rng);
            row
        })
        .collect()
}
