//! Bias-free shift `X + εA[X]` of the plain mean estimator.
//!
//! Since `E[A[X]] = 0` the shift leaves the mean unchanged, while
//! `trace var[X + εA] = trace var[X] − 2εΣ𝓔[X_i] + ε²‖A[X]‖²` with
//! `𝓔[X_i] = ½E[Γ[X_i]]` and `‖A‖² = E|A[X]|²`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sample::TripletSample;
use crate::stats::Moments;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedMean {
    pub epsilon: f64,
    pub mean: DVector<f64>,
    pub mean_stderr: DVector<f64>,
    /// Unbiased empirical trace of the covariance of `X + εA[X]`.
    pub trace_cov: f64,
    pub trace_cov_stderr: f64,
    pub n: usize,
}

fn check_dims(samples: &[TripletSample]) -> Result<usize> {
    let d = samples.first().ok_or(Error::EmptySamples)?.dim();
    match samples.iter().find(|s| s.dim() != d) {
        Some(bad) => Err(Error::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        }),
        None => Ok(d),
    }
}

/// Mean and covariance trace of `X + εA[X]`.
pub fn shifted_mean(samples: &[TripletSample], eps: f64) -> Result<ShiftedMean> {
    let d = check_dims(samples)?;
    let n = samples.len();
    let shifted: Vec<DVector<f64>> = samples.iter().map(|s| &s.x + &s.a * eps).collect();

    let mut mean = DVector::zeros(d);
    let mut mean_stderr = DVector::zeros(d);
    for i in 0..d {
        let m: Moments = shifted.iter().map(|y| y[i]).collect();
        mean[i] = m.mean();
        mean_stderr[i] = m.std_error();
    }
    // per-sample squared deviations; their mean (rescaled) is the trace
    let dev: Moments = shifted.iter().map(|y| (y - &mean).norm_squared()).collect();
    let scale = if n > 1 {
        n as f64 / (n - 1) as f64
    } else {
        0.0
    };
    Ok(ShiftedMean {
        epsilon: eps,
        mean,
        mean_stderr,
        trace_cov: dev.mean() * scale,
        trace_cov_stderr: dev.std_error() * scale,
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalShift {
    /// `ε* = Σ𝓔[X_i] / ‖A[X]‖²`
    pub epsilon: f64,
    /// `trace var[X] − (Σ𝓔)² / ‖A‖²`
    pub predicted_trace: f64,
    /// `Σ_i 𝓔[X_i]`, estimated as `½ mean(trace Γ)`.
    pub energy: f64,
    pub a_norm_sq: f64,
    pub trace_var: f64,
}

impl OptimalShift {
    /// The fitted parabola `trace var − 2εΣ𝓔 + ε²‖A‖²`.
    pub fn predicted_trace_at(&self, eps: f64) -> f64 {
        self.trace_var - 2.0 * eps * self.energy + eps * eps * self.a_norm_sq
    }
}

/// Variance-minimizing shift. Fails with [`Error::NoReduction`] when every
/// sampled `A[X]` is zero.
pub fn estimate_optimal_epsilon(samples: &[TripletSample]) -> Result<OptimalShift> {
    check_dims(samples)?;
    let energy = 0.5
        * samples
            .iter()
            .map(|s| s.gamma.trace())
            .collect::<Moments>()
            .mean();
    let a_norm_sq = samples
        .iter()
        .map(|s| s.a.norm_squared())
        .collect::<Moments>()
        .mean();
    if !(a_norm_sq > 0.0) {
        return Err(Error::NoReduction);
    }
    let trace_var = shifted_mean(samples, 0.0)?.trace_cov;
    Ok(OptimalShift {
        epsilon: energy / a_norm_sq,
        predicted_trace: trace_var - energy * energy / a_norm_sq,
        energy,
        a_norm_sq,
        trace_var,
    })
}
