use thiserror::Error;

/// Errors raised by samplers, estimators and the analysis harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite coefficient at x = {x}, t = {t}")]
    NonFiniteCoefficient { x: f64, t: f64 },

    #[error("state exploded or became non-finite at step {step}")]
    Explosion { step: usize },

    #[error("derivative self-test failed: {0}")]
    SelfTest(String),

    #[error("provider does not support {0}")]
    Unsupported(&'static str),

    #[error("degenerate sample with Γ[X] = 0; use a regularization ε > 0 (the monotone-limit formula) instead of ε = 0")]
    Degenerate,

    #[error("sample {index} has no payload G / Γ[X,G]")]
    MissingPayload { index: usize },

    #[error("A[X] is statistically zero; no optimal shift exists")]
    NoReduction,

    #[error("kernel covariance is numerically singular")]
    SingularKernel,

    #[error("empty sample set")]
    EmptySamples,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quadrature did not reach tolerance {tol:e} (achieved {achieved:e})")]
    Quadrature { tol: f64, achieved: f64 },

    #[error("need at least {required} points to fit a slope, got {got}")]
    TooFewPoints { required: usize, got: usize },

    #[error("noise floor reached at parameter {param}: stderr {stderr:e} > bias/3 ({bias:e}); increase N")]
    NoiseFloor { param: f64, bias: f64, stderr: f64 },

    #[error("{0} requires a model with a known exact density")]
    NoExactDensity(&'static str),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
