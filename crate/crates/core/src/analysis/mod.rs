//! Oracles, identity checks and convergence-rate measurements.
//!
//! Everything here is independent of the estimator internals except through
//! their public entry points; reference values come from [`quadrature`] or
//! from closed forms in [`oracle`].

pub mod fit;
pub mod harness;
pub mod oracle;
pub mod quadrature;

pub use fit::{fit_loglog, SlopeFit};
pub use harness::{
    bias_curve, ibp_residual, monotone_feps_check, rate_experiment, variance_scaling, BiasCurve,
    BiasPoint, KernelMethod, MonotoneReport, RateReport, RateRow, RateSpec, TestFunction,
    VarianceScaling,
};
pub use oracle::{ConstSigmaOracle, KernelMeanOracle};
pub use quadrature::quadrature_oracle;
