//! Normal-Inverse-Wishart conjugate machinery for Gaussian components.
//!
//! With prior `NIW(μ₀, κ₀, ν₀, Ψ₀)` and a cluster summarized by
//! `(n, Σx, Σxxᵀ)`, the posterior is NIW with
//!
//! ```text
//! κₙ = κ₀ + n,  νₙ = ν₀ + n,  μₙ = (κ₀μ₀ + Σx) / κₙ
//! Ψₙ = Ψ₀ + (Σxxᵀ − Σx Σxᵀ / n) + (κ₀ n / κₙ)(x̄ − μ₀)(x̄ − μ₀)ᵀ
//! ```
//!
//! and the predictive density of a new point is a multivariate Student-t
//! with `νₙ − d + 1` degrees of freedom, location `μₙ` and scale
//! `Ψₙ (κₙ + 1) / (κₙ (νₙ − d + 1))`. Log-determinants and quadratic forms
//! go through Cholesky factors; nothing is inverted explicitly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwParams<T> {
    mu0: Vec<T>,
    kappa0: T,
    nu0: T,
    psi0: Matrix<T>,
}

/// Overrides for the data-driven default prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorOverrides {
    pub mu0: Option<Vec<f64>>,
    pub kappa0: Option<f64>,
    pub nu0: Option<f64>,
    /// Multiplies the empirical covariance used as `Ψ₀`.
    pub psi0_scale: Option<f64>,
}

impl<T: Scalar> NiwParams<T> {
    pub fn new(mu0: Vec<T>, kappa0: T, nu0: T, psi0: Matrix<T>) -> Result<Self> {
        let d = mu0.len();
        if d == 0 {
            return Err(Error::invalid("mu0", "dimension must be at least 1"));
        }
        if psi0.nrows() != d || psi0.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: psi0.nrows(),
            });
        }
        if mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu0", "must be finite"));
        }
        if !kappa0.is_finite() || kappa0 <= T::zero() {
            return Err(Error::invalid("kappa0", format!("must be > 0, got {kappa0}")));
        }
        if !nu0.is_finite() || nu0 <= T::of_usize(d) - T::one() {
            return Err(Error::invalid("nu0", format!("must be > d - 1 = {}, got {nu0}", d - 1)));
        }
        if !psi0.is_symmetric(T::of(1e-12)) {
            return Err(Error::invalid("psi0", "must be symmetric"));
        }
        psi0.cholesky()?;
        Ok(NiwParams { mu0, kappa0, nu0, psi0 })
    }

    /// Weakly informative prior scaled to the data: `μ₀` = data mean,
    /// `κ₀ = 0.01`, `ν₀ = d + 2`, `Ψ₀` = empirical covariance.
    pub fn from_data(x: &Matrix<T>, overrides: &PriorOverrides) -> Result<Self> {
        let d = x.ncols();
        let mu0 = match &overrides.mu0 {
            Some(m) => m.iter().map(|&v| T::of(v)).collect(),
            None => x.column_means(),
        };
        let kappa0 = T::of(overrides.kappa0.unwrap_or(0.01));
        let nu0 = T::of(overrides.nu0.unwrap_or(d as f64 + 2.0));
        let psi0 = x.covariance()?.scaled(T::of(overrides.psi0_scale.unwrap_or(1.0)));
        Self::new(mu0, kappa0, nu0, psi0)
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn mu0(&self) -> &[T] {
        &self.mu0
    }

    pub fn kappa0(&self) -> T {
        self.kappa0
    }

    pub fn nu0(&self) -> T {
        self.nu0
    }

    pub fn psi0(&self) -> &Matrix<T> {
        &self.psi0
    }

    /// Posterior NIW parameters after observing `stats`.
    pub fn posterior(&self, stats: &ClusterStats<T>) -> Result<NiwPosterior<T>> {
        let d = self.dim();
        if stats.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: stats.dim(),
            });
        }
        if stats.n == 0 {
            return Ok(NiwPosterior {
                kappa: self.kappa0,
                nu: self.nu0,
                mu: self.mu0.clone(),
                psi: self.psi0.clone(),
            });
        }
        let n = T::of_usize(stats.n);
        let kappa = self.kappa0 + n;
        let nu = self.nu0 + n;
        let mean: Vec<T> = stats.sum.iter().map(|&s| s / n).collect();
        let mu: Vec<T> = self
            .mu0
            .iter()
            .zip(&stats.sum)
            .map(|(&m, &s)| (self.kappa0 * m + s) / kappa)
            .collect();
        let shrink = self.kappa0 * n / kappa;
        let mut psi = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let centered = stats.scatter[(i, j)] - stats.sum[i] * stats.sum[j] / n;
                let v = self.psi0[(i, j)] + centered + shrink * (mean[i] - self.mu0[i]) * (mean[j] - self.mu0[j]);
                psi[(i, j)] = v;
                psi[(j, i)] = v;
            }
        }
        Ok(NiwPosterior { kappa, nu, mu, psi })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NiwPosterior<T> {
    pub kappa: T,
    pub nu: T,
    pub mu: Vec<T>,
    pub psi: Matrix<T>,
}

impl<T: Scalar> NiwPosterior<T> {
    /// Posterior predictive Student-t.
    pub fn predictive(&self) -> Result<StudentT<T>> {
        let d = T::of_usize(self.mu.len());
        let df = self.nu - d + T::one();
        let c = (self.kappa + T::one()) / (self.kappa * df);
        StudentT::new(self.mu.clone(), self.psi.scaled(c), df)
    }
}

/// Multivariate Student-t with a cached Cholesky factor of its scale.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentT<T> {
    loc: Vec<T>,
    scale: Matrix<T>,
    chol: Cholesky<T>,
    df: T,
    ln_norm: T,
}

impl<T: Scalar> StudentT<T> {
    pub fn new(loc: Vec<T>, scale: Matrix<T>, df: T) -> Result<Self> {
        if !(df > T::zero()) {
            return Err(Error::invalid("df", format!("must be > 0, got {df}")));
        }
        let chol = scale.cholesky()?;
        let d = T::of_usize(loc.len());
        let half = T::of(0.5);
        let ln_norm =
            ((df + d) * half).lgamma() - (df * half).lgamma() - half * d * (df * T::of(PI)).ln() - half * chol.ln_det();
        Ok(StudentT {
            loc,
            scale,
            chol,
            df,
            ln_norm,
        })
    }

    pub fn loc(&self) -> &[T] {
        &self.loc
    }

    pub fn scale(&self) -> &Matrix<T> {
        &self.scale
    }

    pub fn df(&self) -> T {
        self.df
    }

    pub fn ln_pdf(&self, x: &[T]) -> T {
        let delta: Vec<T> = x.iter().zip(&self.loc).map(|(&a, &b)| a - b).collect();
        let q = self.chol.quad_form_inv(&delta);
        let d = T::of_usize(self.loc.len());
        self.ln_norm - T::of(0.5) * (self.df + d) * (q / self.df).ln_1p()
    }
}

/// Running sufficient statistics `(n, Σx, Σxxᵀ)` of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats<T> {
    n: usize,
    sum: Vec<T>,
    scatter: Matrix<T>,
}

impl<T: Scalar> ClusterStats<T> {
    pub fn empty(d: usize) -> Self {
        ClusterStats {
            n: 0,
            sum: vec![T::zero(); d],
            scatter: Matrix::zeros(d, d),
        }
    }

    /// Batch statistics of a set of rows.
    pub fn from_points<'a>(d: usize, points: impl IntoIterator<Item = &'a [T]>) -> Result<Self> {
        let mut s = Self::empty(d);
        for p in points {
            s.add_point(p)?;
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn sum(&self) -> &[T] {
        &self.sum
    }

    pub fn scatter(&self) -> &Matrix<T> {
        &self.scatter
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn add_point(&mut self, x: &[T]) -> Result<()> {
        self.check_dim(x)?;
        self.n += 1;
        self.accumulate(x, T::one());
        Ok(())
    }

    pub fn remove_point(&mut self, x: &[T]) -> Result<()> {
        self.check_dim(x)?;
        if self.n == 0 {
            return Err(Error::StatsUnderflow);
        }
        self.n -= 1;
        if self.n == 0 {
            // restore exact zeros so an emptied component equals a fresh one
            *self = Self::empty(self.dim());
        } else {
            self.accumulate(x, -T::one());
        }
        Ok(())
    }

    fn accumulate(&mut self, x: &[T], sign: T) {
        let d = self.dim();
        for i in 0..d {
            self.sum[i] = self.sum[i] + sign * x[i];
            for j in 0..=i {
                let v = self.scatter[(i, j)] + sign * x[i] * x[j];
                self.scatter[(i, j)] = v;
                self.scatter[(j, i)] = v;
            }
        }
    }
}

/// Log predictive density of `x` for a cluster with statistics `stats`.
pub fn log_posterior_predictive<T: Scalar>(x: &[T], stats: &ClusterStats<T>, prior: &NiwParams<T>) -> Result<T> {
    if x.len() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: x.len(),
        });
    }
    Ok(prior.posterior(stats)?.predictive()?.ln_pdf(x))
}

/// Log predictive density of `x` for a new, empty cluster.
pub fn log_prior_predictive<T: Scalar>(x: &[T], prior: &NiwParams<T>) -> Result<T> {
    log_posterior_predictive(x, &ClusterStats::empty(prior.dim()), prior)
}

/// `ln Γ_d(a)`, the multivariate gamma function.
fn ln_mv_gamma<T: Scalar>(d: usize, a: T) -> T {
    let dd = T::of_usize(d);
    let mut total = dd * (dd - T::one()) * T::of(0.25) * T::of(PI).ln();
    for j in 1..=d {
        total = total + (a + (T::one() - T::of_usize(j)) * T::of(0.5)).lgamma();
    }
    total
}

/// Log marginal likelihood of the points summarized by `stats`, with the
/// component mean and covariance integrated out.
pub fn log_marginal_likelihood<T: Scalar>(stats: &ClusterStats<T>, prior: &NiwParams<T>) -> Result<T> {
    let post = prior.posterior(stats)?;
    let d = prior.dim();
    let dd = T::of_usize(d);
    let n = T::of_usize(stats.n);
    let half = T::of(0.5);
    let ln_det0 = prior.psi0.cholesky()?.ln_det();
    let ln_detn = post.psi.cholesky()?.ln_det();
    Ok(
        -half * n * dd * T::of(PI).ln() + ln_mv_gamma(d, post.nu * half) - ln_mv_gamma(d, prior.nu0 * half)
            + half * prior.nu0 * ln_det0
            - half * post.nu * ln_detn
            + half * dd * (prior.kappa0.ln() - post.kappa.ln()),
    )
}
