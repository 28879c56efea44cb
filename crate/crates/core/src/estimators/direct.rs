//! Sign formulas for scalar `X`.
//!
//! For `ε ≥ 0` write `B_ε = Γ[X, 1/(ε+Γ[X])] + 2A[X]/(ε+Γ[X])`. Then
//! `½E[sign(x − X)·B_ε]` increases to the density as `ε ↓ 0` and equals it at
//! `ε = 0` when `1/Γ[X]` is regular enough. With a payload `G`, the bracket
//! `Γ[X, G/(ε+Γ[X])] + 2G·A[X]/(ε+Γ[X])` gives `f(x)·E[G | X = x]` instead,
//! and it has zero mean, so any `c(x)` may be subtracted from the sign.

use std::fmt;

use rayon::prelude::*;

use super::{ControlFn, DensityEstimate, Method};
use crate::error::{invalid, Error, Result};
use crate::sample::{ExtendedSample, PayloadValue};
use crate::stats::{Estimate, Moments};

/// `sign(0) = 0`.
#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_eps(samples: &[ExtendedSample], eps: f64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(invalid("epsilon", format!("must be ≥ 0, got {eps}")));
    }
    if eps == 0.0 && samples.iter().any(ExtendedSample::is_degenerate) {
        return Err(Error::Degenerate);
    }
    Ok(())
}

#[inline]
fn density_bracket(s: &ExtendedSample, eps: f64) -> f64 {
    s.gamma_x_inv(eps) + 2.0 * s.a() / (eps + s.gamma())
}

/// `Γ[X, G/(ε+Γ)] + 2G·A/(ε+Γ)`, expanding the first term by the product rule.
#[inline]
fn payload_bracket(s: &ExtendedSample, p: &PayloadValue, eps: f64) -> f64 {
    let inv = 1.0 / (eps + s.gamma());
    p.gamma_xg * inv + p.g * s.gamma_x_inv(eps) + 2.0 * p.g * s.a() * inv
}

fn payloads(samples: &[ExtendedSample]) -> Result<Vec<PayloadValue>> {
    samples
        .iter()
        .enumerate()
        .map(|(index, s)| s.payload.ok_or(Error::MissingPayload { index }))
        .collect()
}

/// `½ mean(sign(x − X_n)·B_ε,n)`.
pub fn direct_density(samples: &[ExtendedSample], x: f64, eps: f64) -> Result<Estimate> {
    check_eps(samples, eps)?;
    let m: Moments = samples
        .iter()
        .map(|s| 0.5 * sign(x - s.x()) * density_bracket(s, eps))
        .collect();
    Ok(Estimate::from_moments(&m))
}

/// Per-sample terms `½ sign(x − X_n)·B_ε,n` whose mean is [`direct_density`].
pub fn direct_terms(samples: &[ExtendedSample], x: f64, eps: f64) -> Result<Vec<f64>> {
    check_eps(samples, eps)?;
    Ok(samples
        .iter()
        .map(|s| 0.5 * sign(x - s.x()) * density_bracket(s, eps))
        .collect())
}

/// [`direct_density`] over a grid of scalar points.
pub fn direct_density_grid(
    samples: &[ExtendedSample],
    grid: &[f64],
    eps: f64,
) -> Result<DensityEstimate> {
    check_eps(samples, eps)?;
    let est: Vec<Estimate> = grid
        .par_iter()
        .map(|&x| direct_density(samples, x, eps))
        .collect::<Result<_>>()?;
    Ok(DensityEstimate {
        grid: grid
            .iter()
            .map(|&x| nalgebra::DVector::from_element(1, x))
            .collect(),
        values: est.iter().map(|e| e.value).collect(),
        stderrs: est.iter().map(|e| e.stderr).collect(),
        undefined: vec![false; grid.len()],
        skipped: 0,
        method: Method::Direct,
        parameter: eps,
        n: samples.len(),
        seed: None,
    })
}

/// Control function subtracted from `sign(x − X)`.
#[derive(Clone, Default)]
pub enum Control {
    /// `c = 0`.
    Zero,
    /// `c(x)` = sample mean of `sign(x − X_n)`.
    EmpiricalSign,
    /// `c(x) = Ĉov(sign·B, B) / V̂ar(B)`, the variance-minimizing constant at `x`.
    #[default]
    Optimal,
    Fixed(ControlFn),
}

impl fmt::Debug for Control {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Control::Zero => f.write_str("Zero"),
            Control::EmpiricalSign => f.write_str("EmpiricalSign"),
            Control::Optimal => f.write_str("Optimal"),
            Control::Fixed(_) => f.write_str("Fixed(..)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEstimate {
    /// Estimate of `f(x)·E[G | X = x]`.
    pub estimate: Estimate,
    /// Value of `c(x)` that was used.
    pub control: f64,
    /// Empirical variance of the per-sample terms.
    pub variance: f64,
}

/// `½ mean((sign(x − X_n) − c(x))·(Γ[X, G/(ε+Γ)] + 2G·A/(ε+Γ))_n)`.
///
/// `G` must be essentially bounded; that is the caller's responsibility.
pub fn direct_conditional(
    samples: &[ExtendedSample],
    x: f64,
    eps: f64,
    control: &Control,
) -> Result<ConditionalEstimate> {
    check_eps(samples, eps)?;
    let pay = payloads(samples)?;
    let signs: Vec<f64> = samples.iter().map(|s| sign(x - s.x())).collect();
    let brackets: Vec<f64> = samples
        .iter()
        .zip(&pay)
        .map(|(s, p)| payload_bracket(s, p, eps))
        .collect();

    let c = match control {
        Control::Zero => 0.0,
        Control::Fixed(f) => f(x),
        Control::EmpiricalSign => signs.iter().copied().collect::<Moments>().mean(),
        Control::Optimal => {
            let n = samples.len() as f64;
            let mb = brackets.iter().sum::<f64>() / n;
            let msb = signs.iter().zip(&brackets).map(|(s, b)| s * b).sum::<f64>() / n;
            let (mut cov, mut var) = (0.0, 0.0);
            for (s, b) in signs.iter().zip(&brackets) {
                cov += (s * b - msb) * (b - mb);
                var += (b - mb) * (b - mb);
            }
            if var > 0.0 {
                cov / var
            } else {
                0.0
            }
        }
    };

    let m: Moments = signs
        .iter()
        .zip(&brackets)
        .map(|(s, b)| 0.5 * (s - c) * b)
        .collect();
    Ok(ConditionalEstimate {
        estimate: Estimate::from_moments(&m),
        control: c,
        variance: m.variance(),
    })
}

/// Sample mean of `Γ[X, G/(ε+Γ[X])] + 2G·A[X]/(ε+Γ[X])`, which must straddle zero.
pub fn control_zero_mean(samples: &[ExtendedSample], eps: f64) -> Result<Estimate> {
    check_eps(samples, eps)?;
    let pay = payloads(samples)?;
    let m: Moments = samples
        .iter()
        .zip(&pay)
        .map(|(s, p)| payload_bracket(s, p, eps))
        .collect();
    Ok(Estimate::from_moments(&m))
}
