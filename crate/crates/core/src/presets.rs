//! Compiled-in validation models with exact derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::analysis::ConstSigmaOracle;
use crate::error::{invalid, Error, Result};
use crate::mcspace::{McFunctional, McSpaceProvider};
use crate::poisson::{make_interval_model, Intensity, PoissonProvider, Smooth};
use crate::provider::StructureProvider;
use crate::wiener::{Coefficient, ErrorSource, EulerConfig, SdeModel, WienerProvider};

pub const GAUSS_STEPS: usize = 4;
pub const GBM_STEPS: usize = 512;
pub const GBM_SIGMA: f64 = 0.3;
pub const GBM_RATE: f64 = 0.05;
pub const POISSON_RATE: f64 = 5.0;

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `dX = dB` on `[0, 1]` from `x0 = 0`, so `X ~ N(0, 1)`, `Γ[X] = 1`, `A[X] = −X/2`.
pub fn gauss_const_sigma() -> WienerProvider {
    gauss_const_sigma_with(GAUSS_STEPS)
}

pub fn gauss_const_sigma_with(steps: usize) -> WienerProvider {
    let model = SdeModel::new(
        0.0,
        1.0,
        Coefficient::constant(1.0),
        Coefficient::constant(0.0),
        ErrorSource::Brownian,
    )
    .expect("valid constant model");
    WienerProvider::new(model, EulerConfig::new(steps.max(1)).expect("steps ≥ 1"))
        .with_exact_density(std_normal_pdf)
}

/// The law of the gauss preset in closed form.
pub fn gauss_oracle() -> ConstSigmaOracle {
    ConstSigmaOracle::new(0.0, 0.0, 1.0, 1.0).expect("valid constant model")
}

/// Lognormal density of `x0·exp((r − σ²/2)T + σB_T)`.
pub fn lognormal_density(x: f64, x0: f64, r: f64, sigma: f64, t: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s2 = sigma * sigma * t;
    let m = x0.ln() + (r - 0.5 * sigma * sigma) * t;
    let z = x.ln() - m;
    (-0.5 * z * z / s2).exp() / (x * (2.0 * PI * s2).sqrt())
}

/// Geometric Brownian motion `dX = σX dB + rX dt`, `x0 = 1`, `T = 1`.
pub fn gbm() -> WienerProvider {
    gbm_with(GBM_STEPS)
}

pub fn gbm_with(steps: usize) -> WienerProvider {
    let model = SdeModel::new(
        1.0,
        1.0,
        Coefficient::linear(GBM_SIGMA),
        Coefficient::linear(GBM_RATE),
        ErrorSource::Brownian,
    )
    .expect("valid linear model");
    WienerProvider::new(model, EulerConfig::new(steps.max(1)).expect("steps ≥ 1"))
        .with_exact_density(|x| lognormal_density(x, 1.0, GBM_RATE, GBM_SIGMA, 1.0))
}

/// `X = Σ p_i²` over a Poisson process of rate 5 on `(0, 1)` with base
/// structure `γ[v](x) = x(1−x)v′(x)²`.
pub fn poisson_interval() -> PoissonProvider {
    let weight = Smooth::new(|x| x * (1.0 - x), |x| 1.0 - 2.0 * x, |_| -2.0);
    let h = Smooth::new(|x| x * x, |x| 2.0 * x, |_| 2.0);
    let (model, _) = make_interval_model(
        weight,
        (0.0, 1.0),
        Intensity::Uniform { rate: POISSON_RATE },
        h,
    )
    .expect("preset derivatives are exact");
    PoissonProvider::new(model)
}

/// `X = U_0`, uniform on `(0, 1)`.
pub fn mc_identity() -> McSpaceProvider {
    McSpaceProvider::new(McFunctional::identity()).with_exact_density(|x| {
        if (0.0..=1.0).contains(&x) {
            1.0
        } else {
            0.0
        }
    })
}

/// The named presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    GaussConstSigma,
    Gbm,
    PoissonInterval,
    McIdentity,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::GaussConstSigma,
        Preset::Gbm,
        Preset::PoissonInterval,
        Preset::McIdentity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::GaussConstSigma => "gauss_const_sigma",
            Preset::Gbm => "gbm",
            Preset::PoissonInterval => "poisson_interval",
            Preset::McIdentity => "mc_identity",
        }
    }

    pub fn provider(&self) -> Box<dyn StructureProvider> {
        match self {
            Preset::GaussConstSigma => Box::new(gauss_const_sigma()),
            Preset::Gbm => Box::new(gbm()),
            Preset::PoissonInterval => Box::new(poisson_interval()),
            Preset::McIdentity => Box::new(mc_identity()),
        }
    }

    /// Smallest ε usable by the sign formulas: 0 where `Γ[X]` stays positive
    /// and `1/Γ[X]` is regular, 0.01 otherwise.
    pub fn min_epsilon(&self) -> f64 {
        match self {
            Preset::GaussConstSigma | Preset::Gbm => 0.0,
            Preset::PoissonInterval | Preset::McIdentity => 0.01,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid("preset", format!("unknown preset {s:?}")))
    }
}
