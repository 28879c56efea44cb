//! Monte Carlo simulation with error calculus.
//!
//! Every draw of a random variable `X` comes with its square field `Γ[X]`
//! and generator `A[X]` under a Dirichlet-form error structure. Three
//! structures are provided: Wiener space via an augmented Euler scheme
//! ([`wiener`]), Poisson point processes ([`poisson`]) and the Monte Carlo
//! space of uniform coordinates ([`mcspace`]). On top of the triplets,
//! [`estimators`] offers a bias-free shifted mean, a randomized kernel density
//! estimator and sign formulas that estimate densities at the
//! law-of-large-numbers rate. [`analysis`] holds the oracles and rate
//! experiments used to validate them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod estimators;
pub mod mcspace;
pub mod poisson;
pub mod presets;
pub mod provider;
pub mod rng;
pub mod sample;
pub mod selftest;
pub mod stats;
pub mod wiener;

pub use error::{Error, Result};
pub use estimators::{
    Control, Criterion, DensityEstimate, EpsilonChoice, EstimatorConfig, Method, DEFAULT_RIDGE,
};
pub use presets::Preset;
pub use provider::{sample_extended, sample_triplets, Capabilities, StructureProvider};
pub use rng::{derive_substream, RngStream, StreamId};
pub use sample::{
    validate_triplet, ExtendedSample, Payload, PayloadValue, TripletSample, ValidationReport,
};
pub use selftest::SelfTestReport;
pub use stats::{Estimate, Moments};
