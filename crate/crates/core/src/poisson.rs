//! Poisson point process with the white error structure.
//!
//! For `X = N(h)` the structure gives `Γ[X] = N(γ[h])`, `A[X] = N(a[h])` and,
//! by bilinearity, `Γ[X, Γ[X]] = N(γ[h, γ[h]])`. All three are plain sums over
//! the simulated points.

use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, Poisson};

use crate::analysis::quadrature::quadrature_oracle;
use crate::error::{invalid, Error, Result};
use crate::provider::{Capabilities, StructureProvider};
use crate::rng::RngStream;
use crate::sample::{ExtendedSample, TripletSample};
use crate::selftest::{Checker, SelfTestReport};

pub type PointFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PointSampler = Arc<dyn Fn(&mut RngStream) -> f64 + Send + Sync>;

/// Finite-mass intensity on a window, plus the point functions `h`, `γ[h]`,
/// `a[h]` and `γ[h, γ[h]]` of the base error structure.
#[derive(Clone)]
pub struct PoissonModel {
    pub mass: f64,
    /// Draws one point with law `μ / mass`.
    pub point_sampler: PointSampler,
    pub h: PointFn,
    pub gamma_h: PointFn,
    pub a_h: PointFn,
    pub gamma_h_gamma_h: PointFn,
}

impl fmt::Debug for PoissonModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PoissonModel")
            .field("mass", &self.mass)
            .finish_non_exhaustive()
    }
}

/// One Poisson draw: the extended sample and the points that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonDraw {
    pub sample: ExtendedSample,
    pub points: Vec<f64>,
}

impl PoissonDraw {
    /// No points, or points where `γ[h]` vanishes.
    pub fn is_degenerate(&self) -> bool {
        self.sample.is_degenerate()
    }
}

pub fn sample_poisson_functional(model: &PoissonModel, rng: &mut RngStream) -> Result<PoissonDraw> {
    let dist = Poisson::new(model.mass).map_err(|e| invalid("mass", e.to_string()))?;
    let count = dist.sample(rng) as usize;
    let points: Vec<f64> = (0..count).map(|_| (model.point_sampler)(rng)).collect();
    let (mut x, mut g, mut a, mut gg) = (0.0, 0.0, 0.0, 0.0);
    for &p in &points {
        x += (model.h)(p);
        g += (model.gamma_h)(p);
        a += (model.a_h)(p);
        gg += (model.gamma_h_gamma_h)(p);
    }
    Ok(PoissonDraw {
        sample: ExtendedSample::new(x, g, a, gg),
        points,
    })
}

/// Intensity of the process on an interval window.
#[derive(Clone)]
pub enum Intensity {
    /// Constant rate per unit length.
    Uniform { rate: f64 },
    /// Density `ρ` with derivative `ρ′`; `bound ≥ sup ρ` drives rejection sampling.
    Density {
        rho: PointFn,
        drho: PointFn,
        bound: f64,
    },
}

impl fmt::Debug for Intensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Intensity::Uniform { rate } => write!(f, "Uniform {{ rate: {rate} }}"),
            Intensity::Density { bound, .. } => write!(f, "Density {{ bound: {bound}, .. }}"),
        }
    }
}

/// A function with its first two derivatives.
#[derive(Clone)]
pub struct Smooth {
    pub f: PointFn,
    pub df: PointFn,
    pub d2f: PointFn,
}

impl Smooth {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
        }
    }
}

const PROBES: usize = 33;

/// Build a model on `(l, u)` whose base structure is `γ[v] = c·v′²` with the
/// generator symmetric with respect to `μ = ρ dx`:
/// `a[v] = ½c·v″ + ½(c′ + c·ρ′/ρ)·v′`.
///
/// `c` should vanish at both ends of the window; otherwise the base form has
/// boundary terms and the integration-by-parts identities do not hold.
/// Only `c` and `c′` of `weight` are used.
pub fn make_interval_model(
    weight: Smooth,
    interval: (f64, f64),
    intensity: Intensity,
    h: Smooth,
) -> Result<(PoissonModel, SelfTestReport)> {
    let (lo, hi) = interval;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return Err(invalid(
            "interval",
            format!("need finite l < u, got ({lo}, {hi})"),
        ));
    }

    let mut chk = Checker::new();
    for i in 1..PROBES {
        let x = lo + (hi - lo) * i as f64 / PROBES as f64;
        chk.check("c'", &*weight.f, (weight.df)(x), x);
        chk.check("h'", &*h.f, (h.df)(x), x);
        chk.check("h''", &*h.df, (h.d2f)(x), x);
        if let Intensity::Density { rho, drho, .. } = &intensity {
            chk.check("rho'", &**rho, drho(x), x);
        }
        if (weight.f)(x) < 0.0 {
            return Err(invalid("weight", format!("c({x}) < 0")));
        }
    }
    let report = chk.finish();
    if !report.passed {
        return Err(Error::SelfTest(report.worst.unwrap_or_default()));
    }

    let (mass, log_drift, point_sampler): (f64, PointFn, PointSampler) = match intensity {
        Intensity::Uniform { rate } => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(invalid("rate", format!("must be positive, got {rate}")));
            }
            (
                rate * (hi - lo),
                Arc::new(|_| 0.0),
                Arc::new(move |rng: &mut RngStream| lo + (hi - lo) * rng.uniform()),
            )
        }
        Intensity::Density { rho, drho, bound } => {
            let mass = quadrature_oracle(|x| rho(x), lo, hi, 1e-10)?;
            if !(mass > 0.0 && mass.is_finite()) {
                return Err(invalid(
                    "intensity",
                    format!("mass must be positive and finite, got {mass}"),
                ));
            }
            let r = rho.clone();
            let sampler: PointSampler = Arc::new(move |rng: &mut RngStream| loop {
                let x = lo + (hi - lo) * rng.uniform();
                if rng.uniform() * bound <= r(x) {
                    return x;
                }
            });
            (mass, Arc::new(move |x| drho(x) / rho(x)), sampler)
        }
    };

    let Smooth { f: c, df: dc, .. } = weight;
    let Smooth {
        f: hf,
        df: dh,
        d2f: d2h,
    } = h;

    let gamma_h: PointFn = {
        let (c, dh) = (c.clone(), dh.clone());
        Arc::new(move |x| c(x) * dh(x) * dh(x))
    };
    let a_h: PointFn = {
        let (c, dc, dh, d2h) = (c.clone(), dc.clone(), dh.clone(), d2h.clone());
        Arc::new(move |x| 0.5 * c(x) * d2h(x) + 0.5 * (dc(x) + c(x) * log_drift(x)) * dh(x))
    };
    let gamma_h_gamma_h: PointFn = Arc::new(move |x| {
        let (cx, h1) = (c(x), dh(x));
        // c·h′·(c·h′²)′
        cx * h1 * (dc(x) * h1 * h1 + 2.0 * cx * h1 * d2h(x))
    });

    Ok((
        PoissonModel {
            mass,
            point_sampler,
            h: hf,
            gamma_h,
            a_h,
            gamma_h_gamma_h,
        },
        report,
    ))
}

#[derive(Debug, Clone)]
pub struct PoissonProvider {
    pub model: PoissonModel,
}

impl PoissonProvider {
    pub fn new(model: PoissonModel) -> Self {
        Self { model }
    }
}

impl StructureProvider for PoissonProvider {
    fn dimension(&self) -> usize {
        1
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            triplet: true,
            extended: true,
            known_density: false,
        }
    }

    fn sample_triplet(&self, rng: &mut RngStream) -> Result<TripletSample> {
        Ok(sample_poisson_functional(&self.model, rng)?.sample.base)
    }

    fn sample_extended(&self, rng: &mut RngStream) -> Result<ExtendedSample> {
        Ok(sample_poisson_functional(&self.model, rng)?.sample)
    }
}
