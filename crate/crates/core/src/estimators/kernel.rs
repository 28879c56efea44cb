//! Gaussian kernels: the randomized kernel driven by `(Γ[X], A[X])` and the
//! classical fixed-bandwidth estimator.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

use super::{Criterion, DensityEstimate, EstimatorConfig, Method};
use crate::error::{invalid, Error, Result};
use crate::sample::TripletSample;
use crate::stats::Moments;

/// `ε = N^{−2/(d+8)}` for [`Criterion::L2`], `ε = N^{−2/(d+4)}` for [`Criterion::Poly`].
pub fn epsilon_rule(n: usize, d: usize, criterion: Criterion) -> Result<f64> {
    if n < 2 {
        return Err(invalid("N", format!("need N ≥ 2, got {n}")));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be ≥ 1"));
    }
    let denom = match criterion {
        Criterion::L2 => d + 8,
        Criterion::Poly => d + 4,
    } as f64;
    Ok((n as f64).powf(-2.0 / denom))
}

/// Classical bandwidth realizing the baseline rates:
/// `h = N^{−1/(d+4)}` (L²) or `h = N^{−1/(d+2)}` (polynomial criterion).
pub fn classical_bandwidth(n: usize, d: usize, criterion: Criterion) -> Result<f64> {
    if n < 2 {
        return Err(invalid("N", format!("need N ≥ 2, got {n}")));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be ≥ 1"));
    }
    let denom = match criterion {
        Criterion::L2 => d + 4,
        Criterion::Poly => d + 2,
    } as f64;
    Ok((n as f64).powf(-1.0 / denom))
}

/// Normal density with a fixed center and covariance, factored once.
#[derive(Debug, Clone)]
pub enum PreparedKernel {
    Scalar {
        center: f64,
        inv_var: f64,
        norm: f64,
    },
    Full(Box<FullKernel>),
}

#[derive(Debug, Clone)]
pub struct FullKernel {
    center: DVector<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
    log_norm: f64,
}

impl PreparedKernel {
    /// Fails with [`Error::SingularKernel`] when the covariance is not
    /// numerically positive definite.
    pub fn new(center: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = center.len();
        if cov.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        if d == 1 {
            return Self::scalar(center[0], cov[(0, 0)]);
        }
        let chol = Cholesky::new(cov).ok_or(Error::SingularKernel)?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        if !log_det.is_finite() {
            return Err(Error::SingularKernel);
        }
        Ok(PreparedKernel::Full(Box::new(FullKernel {
            center,
            chol,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })))
    }

    pub fn scalar(center: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !var.is_finite() || !center.is_finite() {
            return Err(Error::SingularKernel);
        }
        let norm = 1.0 / (2.0 * PI * var).sqrt();
        if !norm.is_finite() {
            return Err(Error::SingularKernel);
        }
        Ok(PreparedKernel::Scalar {
            center,
            inv_var: 1.0 / var,
            norm,
        })
    }

    #[inline]
    pub fn eval_scalar(&self, x: f64) -> f64 {
        match self {
            PreparedKernel::Scalar {
                center,
                inv_var,
                norm,
            } => {
                let z = x - center;
                norm * (-0.5 * z * z * inv_var).exp()
            }
            PreparedKernel::Full(_) => self.eval(&DVector::from_element(1, x)),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            PreparedKernel::Scalar { .. } => self.eval_scalar(x[0]),
            PreparedKernel::Full(k) => {
                let z = x - &k.center;
                let y = k
                    .chol
                    .l_dirty()
                    .solve_lower_triangular(&z)
                    .expect("Cholesky factor has a positive diagonal");
                (k.log_norm - 0.5 * y.norm_squared()).exp()
            }
        }
    }
}

/// Density of `N(0, Σ + ridge·I)` at `z`.
pub fn gaussian_kernel_eval(z: &DVector<f64>, sigma: &DMatrix<f64>, ridge: f64) -> Result<f64> {
    if ridge < 0.0 {
        return Err(invalid("ridge", "must be ≥ 0"));
    }
    let d = z.len();
    let cov = sigma + DMatrix::identity(d, d) * ridge;
    Ok(PreparedKernel::new(DVector::zeros(d), cov)?.eval(z))
}

/// Per-sample kernel `g(· − X − εA[X], εΓ[X] + ε·ridge·I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomKernel {
    pub eps: f64,
    pub ridge: f64,
}

impl RandomKernel {
    pub fn prepare(&self, s: &TripletSample) -> Result<PreparedKernel> {
        let d = s.dim();
        if d == 1 {
            let (x, g, a) = s.scalar_parts();
            return PreparedKernel::scalar(x + self.eps * a, self.eps * (g + self.ridge));
        }
        let center = &s.x + &s.a * self.eps;
        let cov = (&s.gamma + DMatrix::identity(d, d) * self.ridge) * self.eps;
        PreparedKernel::new(center, cov)
    }
}

/// Per-point kernel `g(· − X, h²·I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalKernel {
    pub h: f64,
}

impl ClassicalKernel {
    pub fn prepare(&self, x: &DVector<f64>) -> Result<PreparedKernel> {
        let d = x.len();
        if d == 1 {
            return PreparedKernel::scalar(x[0], self.h * self.h);
        }
        PreparedKernel::new(x.clone(), DMatrix::identity(d, d) * (self.h * self.h))
    }
}

fn density_from_kernels(
    kernels: &[PreparedKernel],
    grid: &[DVector<f64>],
    n: usize,
) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let per_point: Vec<(f64, f64, bool)> = grid
        .par_iter()
        .map(|x| {
            if kernels.is_empty() {
                return (f64::NAN, f64::NAN, true);
            }
            let m: Moments = if x.len() == 1 {
                kernels.iter().map(|k| k.eval_scalar(x[0])).collect()
            } else {
                kernels.iter().map(|k| k.eval(x)).collect()
            };
            // skipped samples count as zero kernel mass
            let total = n as f64;
            let used = m.count() as f64;
            let mean = m.mean() * used / total;
            let second = (m.variance() * (used - 1.0) + m.mean() * m.mean() * used) / total;
            let var = (second - mean * mean).max(0.0) * total / (total - 1.0).max(1.0);
            (mean, (var / total).sqrt(), false)
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut stderrs = Vec::with_capacity(grid.len());
    let mut undefined = Vec::with_capacity(grid.len());
    for (v, s, u) in per_point {
        values.push(v);
        stderrs.push(s);
        undefined.push(u);
    }
    (values, stderrs, undefined)
}

/// `f̂(x) = (1/N) Σ g(x − X_n − εA[X]_n, εΓ[X]_n)` on the configured grid.
///
/// Samples whose regularized covariance is still singular are skipped and
/// counted; if every sample is skipped the grid points are flagged undefined.
pub fn random_kernel_density(
    samples: &[TripletSample],
    cfg: &EstimatorConfig,
) -> Result<DensityEstimate> {
    let first = samples.first().ok_or(Error::EmptySamples)?;
    let d = first.dim();
    if let Some(bad) = samples.iter().find(|s| s.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        });
    }
    let eps = cfg.epsilon.resolve(samples.len(), d)?;
    let kernel = RandomKernel {
        eps,
        ridge: cfg.ridge,
    };
    let prepared: Vec<Result<PreparedKernel>> =
        samples.par_iter().map(|s| kernel.prepare(s)).collect();
    let mut kernels = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for p in prepared {
        match p {
            Ok(k) => kernels.push(k),
            Err(Error::SingularKernel) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let (values, stderrs, undefined) = density_from_kernels(&kernels, &cfg.grid, samples.len());
    Ok(DensityEstimate {
        grid: cfg.grid.clone(),
        values,
        stderrs,
        undefined,
        skipped,
        method: Method::RandomKernel,
        parameter: eps,
        n: samples.len(),
        seed: None,
    })
}

/// `f̂(x) = (1/N) Σ g(x − X_n, h²·I)`.
pub fn classical_kde(
    points: &[DVector<f64>],
    h: f64,
    grid: &[DVector<f64>],
) -> Result<DensityEstimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("bandwidth must be positive, got {h}")));
    }
    if points.is_empty() {
        return Err(Error::EmptySamples);
    }
    let kernel = ClassicalKernel { h };
    let kernels = points
        .iter()
        .map(|p| kernel.prepare(p))
        .collect::<Result<Vec<_>>>()?;
    let (values, stderrs, undefined) = density_from_kernels(&kernels, grid, points.len());
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        stderrs,
        undefined,
        skipped: 0,
        method: Method::Classical,
        parameter: h,
        n: points.len(),
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{grid_1d, EpsilonChoice};
    use nalgebra::dmatrix;

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn epsilon_rules() {
        assert!(
            (epsilon_rule(4096, 1, Criterion::L2).unwrap() - 4096f64.powf(-2.0 / 9.0)).abs()
                < 1e-15
        );
        assert!((epsilon_rule(4096, 1, Criterion::L2).unwrap() - 0.15749).abs() < 1e-5);
        assert!((epsilon_rule(4096, 1, Criterion::Poly).unwrap() - 0.03589).abs() < 1e-5);
        assert!(epsilon_rule(1, 1, Criterion::L2).is_err());
        assert!(epsilon_rule(10, 0, Criterion::L2).is_err());
    }

    #[test]
    fn standard_normal_values() {
        let one = dmatrix![1.0];
        assert!(
            (gaussian_kernel_eval(&v1(0.0), &one, 0.0).unwrap() - 0.398942280401).abs() < 1e-11
        );
        assert!(
            (gaussian_kernel_eval(&v1(1.0), &one, 0.0).unwrap() - 0.241970724519).abs() < 1e-11
        );
        let zero = dmatrix![0.0];
        let r = gaussian_kernel_eval(&v1(0.0), &zero, 1e-4).unwrap();
        assert!((r - 1.0 / (2.0 * PI * 1e-4).sqrt()).abs() < 1e-9);
        assert!((r - 39.894).abs() < 1e-3);
        assert_eq!(
            gaussian_kernel_eval(&v1(0.0), &zero, 0.0),
            Err(Error::SingularKernel)
        );
    }

    #[test]
    fn full_kernel_matches_product_of_marginals() {
        let z = DVector::from_vec(vec![0.3, -1.1]);
        let cov = dmatrix![2.0, 0.0; 0.0, 0.5];
        let g = gaussian_kernel_eval(&z, &cov, 0.0).unwrap();
        let m1 = gaussian_kernel_eval(&v1(0.3), &dmatrix![2.0], 0.0).unwrap();
        let m2 = gaussian_kernel_eval(&v1(-1.1), &dmatrix![0.5], 0.0).unwrap();
        assert!((g - m1 * m2).abs() < 1e-14);
    }

    #[test]
    fn correlated_kernel_matches_explicit_formula() {
        let z = DVector::from_vec(vec![0.4, 0.2]);
        let cov = dmatrix![1.0, 0.6; 0.6, 2.0];
        let det: f64 = 2.0 - 0.36;
        let inv = dmatrix![2.0, -0.6; -0.6, 1.0] / det;
        let q = (z.transpose() * inv * &z)[(0, 0)];
        let expected = (-0.5 * q).exp() / (2.0 * PI * det.sqrt());
        assert!((gaussian_kernel_eval(&z, &cov, 0.0).unwrap() - expected).abs() < 1e-14);
        assert_eq!(
            gaussian_kernel_eval(&z, &dmatrix![1.0, 1.0; 1.0, 1.0], 0.0),
            Err(Error::SingularKernel)
        );
    }

    #[test]
    fn single_sample_reduces_to_kernel() {
        let s = vec![
            TripletSample::scalar(0.0, 1.0, 0.0),
            TripletSample::scalar(0.0, 1.0, 0.0),
        ];
        let cfg = EstimatorConfig::new(2, EpsilonChoice::Manual(1.0), grid_1d(0.0, 0.0, 1))
            .unwrap()
            .with_ridge(0.0);
        let est = random_kernel_density(&s, &cfg).unwrap();
        assert!((est.values[0] - 0.398942280401).abs() < 1e-11);
        assert_eq!(est.stderrs[0], 0.0);
    }

    #[test]
    fn all_singular_flags_undefined() {
        let s = vec![TripletSample::scalar(0.0, 0.0, 0.0); 3];
        let cfg = EstimatorConfig::new(3, EpsilonChoice::Manual(0.5), grid_1d(-1.0, 1.0, 3))
            .unwrap()
            .with_ridge(0.0);
        let est = random_kernel_density(&s, &cfg).unwrap();
        assert_eq!(est.skipped, 3);
        assert!(est.undefined.iter().all(|&u| u));
    }

    #[test]
    fn classical_single_point_and_flattening() {
        let pts = vec![v1(0.0)];
        let est = classical_kde(&pts, 1.0, &[v1(0.0)]).unwrap();
        assert!((est.values[0] - 0.398942280401).abs() < 1e-11);
        let wide = classical_kde(&pts, 1e6, &[v1(0.0), v1(3.0)]).unwrap();
        assert!(wide.values.iter().all(|&v| v < 1e-6));
        assert!(classical_kde(&pts, 0.0, &[v1(0.0)]).is_err());
    }

    #[test]
    fn classical_bandwidths() {
        assert!(
            (classical_bandwidth(1024, 1, Criterion::L2).unwrap() - 1024f64.powf(-0.2)).abs()
                < 1e-15
        );
        assert!((classical_bandwidth(1000, 1, Criterion::Poly).unwrap() - 0.1).abs() < 1e-12);
    }
}
