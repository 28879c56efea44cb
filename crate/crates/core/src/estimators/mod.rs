//! Estimators built on `(X, Γ[X], A[X])` samples.
//!
//! * [`mean`]: the shifted mean `X + εA[X]` and its variance-optimal shift.
//! * [`kernel`]: the randomized Gaussian kernel `g(x − X − εA[X], εΓ[X])` and
//!   the classical fixed-bandwidth baseline.
//! * [`direct`]: the sign formulas for the density and for `f(x)·E[G | X = x]`.

pub mod direct;
pub mod kernel;
pub mod mean;

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{invalid, Result};

pub use direct::{
    control_zero_mean, direct_conditional, direct_density, direct_density_grid, direct_terms,
    ConditionalEstimate, Control,
};
pub use kernel::{
    classical_bandwidth, classical_kde, epsilon_rule, gaussian_kernel_eval, random_kernel_density,
    ClassicalKernel, PreparedKernel, RandomKernel,
};
pub use mean::{estimate_optimal_epsilon, shifted_mean, OptimalShift, ShiftedMean};

/// Default ridge added to `Γ` (scaled by ε) in the randomized kernel.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Error criterion driving the choice of ε (or of the classical bandwidth).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    /// Root mean square error.
    L2,
    /// `|E f̂² − f²| + |E f̂ − f|`.
    Poly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonChoice {
    Rule(Criterion),
    Manual(f64),
}

impl EpsilonChoice {
    pub fn resolve(&self, n: usize, d: usize) -> Result<f64> {
        match *self {
            EpsilonChoice::Rule(c) => epsilon_rule(n, d, c),
            EpsilonChoice::Manual(e) if e > 0.0 && e.is_finite() => Ok(e),
            EpsilonChoice::Manual(e) => Err(invalid("epsilon", format!("must be > 0, got {e}"))),
        }
    }
}

#[derive(Clone)]
pub struct EstimatorConfig {
    pub n_samples: usize,
    pub epsilon: EpsilonChoice,
    pub grid: Vec<DVector<f64>>,
    pub ridge: f64,
    pub control: Control,
}

impl fmt::Debug for EstimatorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EstimatorConfig")
            .field("n_samples", &self.n_samples)
            .field("epsilon", &self.epsilon)
            .field("grid_len", &self.grid.len())
            .field("ridge", &self.ridge)
            .field("control", &self.control)
            .finish()
    }
}

impl EstimatorConfig {
    pub fn new(n_samples: usize, epsilon: EpsilonChoice, grid: Vec<DVector<f64>>) -> Result<Self> {
        if n_samples < 2 {
            return Err(invalid("N", "need at least 2 samples"));
        }
        if grid.is_empty() {
            return Err(invalid("grid", "must not be empty"));
        }
        if let EpsilonChoice::Manual(e) = epsilon {
            if !(e > 0.0) {
                return Err(invalid("epsilon", format!("must be > 0, got {e}")));
            }
        }
        Ok(Self {
            n_samples,
            epsilon,
            grid,
            ridge: DEFAULT_RIDGE,
            control: Control::default(),
        })
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn with_control(mut self, control: Control) -> Self {
        self.control = control;
        self
    }
}

/// `count` equally spaced scalar points on `[min, max]`.
pub fn grid_1d(min: f64, max: f64, count: usize) -> Vec<DVector<f64>> {
    match count {
        0 => Vec::new(),
        1 => vec![DVector::from_element(1, min)],
        _ => (0..count)
            .map(|i| DVector::from_element(1, min + (max - min) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RandomKernel,
    Classical,
    Direct,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RandomKernel => "random_kernel",
            Method::Classical => "classical",
            Method::Direct => "direct",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Density values on a grid with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Grid points where every sample was skipped (value is NaN there).
    pub undefined: Vec<bool>,
    /// Samples skipped because their kernel covariance was singular.
    pub skipped: usize,
    pub method: Method,
    /// ε for the randomized kernel and the direct formula, `h` for the classical kernel.
    pub parameter: f64,
    pub n: usize,
    pub seed: Option<u64>,
}

impl DensityEstimate {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// A scalar control function `c(x)`.
pub type ControlFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
