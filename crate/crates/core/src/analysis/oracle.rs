//! Closed-form laws of `(X, Γ[X], A[X])` used as reference values.
//!
//! The kernel means here are computed by quadrature over the law of the
//! driving Gaussian, without going through the estimator code.

use std::f64::consts::PI;

use super::quadrature::quadrature_oracle;
use crate::error::{invalid, Result};

const Z_RANGE: f64 = 12.0;
const TOL: f64 = 1e-13;

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let z = x - mean;
    (-0.5 * z * z / var).exp() / (2.0 * PI * var).sqrt()
}

/// Models whose expected kernel values can be computed without sampling.
pub trait KernelMeanOracle: Send + Sync {
    /// Exact density of `X`.
    fn density(&self, x: f64) -> f64;

    /// `E[g(x − X − εA[X], ε(Γ[X] + ridge))]`.
    fn random_kernel_mean(&self, eps: f64, ridge: f64, x: f64) -> Result<f64>;

    /// `E[g(x − X, h²)]`.
    fn classical_mean(&self, h: f64, x: f64) -> Result<f64>;
}

/// `X_T = x0 + rT + σB_T` with constant `σ` and `r`, for which
/// `Γ[X] = σ²T` and `A[X] = −σB_T/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstSigmaOracle {
    pub mean: f64,
    pub sd: f64,
}

impl ConstSigmaOracle {
    pub fn new(x0: f64, drift: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma != 0.0 && sigma.is_finite() && horizon > 0.0) {
            return Err(invalid("sigma", "need σ ≠ 0 and T > 0"));
        }
        Ok(Self {
            mean: x0 + drift * horizon,
            sd: sigma.abs() * horizon.sqrt(),
        })
    }

    /// `E[f(Z)]` for standard normal `Z`; `peak` and `width` locate a narrow
    /// feature of `f` that the quadrature must not step over.
    fn gaussian_average(&self, f: impl Fn(f64) -> f64, peak: f64, width: f64) -> Result<f64> {
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let mut cuts = vec![-Z_RANGE, Z_RANGE];
        for k in [-10.0, -1.0, 0.0, 1.0, 10.0] {
            let c = peak + k * width;
            if c.abs() < Z_RANGE {
                cuts.push(c);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += quadrature_oracle(|z| phi(z) * f(z), w[0], w[1], TOL)?;
        }
        Ok(total)
    }
}

impl KernelMeanOracle for ConstSigmaOracle {
    fn density(&self, x: f64) -> f64 {
        normal_pdf(x, self.mean, self.sd * self.sd)
    }

    fn random_kernel_mean(&self, eps: f64, ridge: f64, x: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(invalid("epsilon", "must be > 0"));
        }
        let var = eps * (self.sd * self.sd + ridge);
        let slope = self.sd * (1.0 - 0.5 * eps);
        if slope == 0.0 {
            return Ok(normal_pdf(x, self.mean, var));
        }
        self.gaussian_average(
            |z| normal_pdf(x, self.mean + slope * z, var),
            (x - self.mean) / slope,
            var.sqrt() / slope.abs(),
        )
    }

    fn classical_mean(&self, h: f64, x: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(invalid("h", "must be > 0"));
        }
        self.gaussian_average(
            |z| normal_pdf(x, self.mean + self.sd * z, h * h),
            (x - self.mean) / self.sd,
            h / self.sd,
        )
    }
}
