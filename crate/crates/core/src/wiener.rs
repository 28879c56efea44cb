//! Scalar SDE on Wiener space under the Ornstein–Uhlenbeck structure.
//!
//! `X_t = x0 + ∫σ(X_s, s) dB_s + ∫r(X_s, s) ds` is discretized on the uniform
//! grid `t_k = kT/n`, and the square field `Γ[X^n]`, the generator `A[X^n]`
//! and (for extended samples) `Γ[X^n, Γ[X^n]]` of the discrete variable are
//! carried along step by step.
//!
//! Under the OU structure the increments `ΔB_k` are independent coordinates
//! with `Γ[ΔB_k] = Δt` and `A[ΔB_k] = −ΔB_k / 2`. Putting an error on `x0`
//! instead (or in addition) sets `Γ[X_0] = v0`, `A[X_0] = a0`.
//!
//! Two recursions are available for the `Γ` component. [`AugmentedScheme::ChainRule`]
//! applies the functional calculus to one Euler step, so the carried values
//! are exactly `Γ[X^n]` and `A[X^n]`. [`AugmentedScheme::Euler`] is the plain
//! Euler discretization of the augmented SDE; its `A` component coincides with
//! the chain rule but its `Γ` component differs by
//! `σ′²(ΔB² − Δt)Γ + 2σ′r′ΔBΔtΓ + r′²Δt²Γ` per step, which vanishes only in mean.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::provider::{Capabilities, StructureProvider};
use crate::rng::RngStream;
use crate::sample::{ExtendedSample, TripletSample};
use crate::selftest::{Checker, SelfTestReport};

/// Any state component above this magnitude aborts the simulation.
pub const EXPLOSION_BOUND: f64 = 1e12;

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A coefficient `c(x, t)` with its first two `x`-derivatives.
#[derive(Clone)]
pub struct Coefficient {
    pub value: ScalarFn,
    pub dx: ScalarFn,
    pub dxx: ScalarFn,
}

impl Coefficient {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        dxx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            dx: Arc::new(dx),
            dxx: Arc::new(dxx),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(c, 0.0)
    }

    /// `k · x`
    pub fn linear(k: f64) -> Self {
        Self::affine(0.0, k)
    }

    /// `c0 + k · x`
    pub fn affine(c0: f64, k: f64) -> Self {
        Self::new(move |x, _| c0 + k * x, move |_, _| k, |_, _| 0.0)
    }

    #[inline]
    fn eval(&self, x: f64, t: f64) -> (f64, f64, f64) {
        ((self.value)(x, t), (self.dx)(x, t), (self.dxx)(x, t))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Coefficient(..)")
    }
}

/// Where the error is put.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorSource {
    /// OU structure on the driving Brownian motion.
    Brownian,
    /// Error on `x0` only, with `Γ[x0] = variance`.
    Initial { variance: f64 },
    /// Both, independent.
    Both { variance: f64 },
}

impl ErrorSource {
    pub fn brownian(&self) -> bool {
        matches!(self, ErrorSource::Brownian | ErrorSource::Both { .. })
    }

    pub fn initial_variance(&self) -> f64 {
        match *self {
            ErrorSource::Brownian => 0.0,
            ErrorSource::Initial { variance } | ErrorSource::Both { variance } => variance,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdeModel {
    pub x0: f64,
    pub horizon: f64,
    pub sigma: Coefficient,
    pub drift: Coefficient,
    pub error_source: ErrorSource,
    /// `A[x0]`; only meaningful with an initial-value error. Zero by default.
    pub initial_bias: f64,
}

impl SdeModel {
    pub fn new(
        x0: f64,
        horizon: f64,
        sigma: Coefficient,
        drift: Coefficient,
        error_source: ErrorSource,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(
                "horizon",
                format!("must be positive, got {horizon}"),
            ));
        }
        let v0 = error_source.initial_variance();
        if !(v0 >= 0.0 && v0.is_finite()) {
            return Err(invalid("variance", format!("must be ≥ 0, got {v0}")));
        }
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        Ok(Self {
            x0,
            horizon,
            sigma,
            drift,
            error_source,
            initial_bias: 0.0,
        })
    }

    pub fn with_initial_bias(mut self, a0: f64) -> Self {
        self.initial_bias = a0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AugmentedScheme {
    /// Functional calculus applied to each Euler step (exact `Γ[X^n]`, `A[X^n]`).
    #[default]
    ChainRule,
    /// Euler discretization of the augmented SDE.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    pub steps: usize,
    pub record_path: bool,
    pub scheme: AugmentedScheme,
}

impl EulerConfig {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("steps", "must be ≥ 1"));
        }
        Ok(Self {
            steps,
            record_path: false,
            scheme: AugmentedScheme::ChainRule,
        })
    }

    pub fn with_scheme(mut self, scheme: AugmentedScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_path = true;
        self
    }
}

/// Diffusion and drift vectors of the augmented SDE for `(X, Γ[X], A[X])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedCoefficients {
    pub diffusion: [f64; 3],
    pub drift: [f64; 3],
}

/// Coefficients of the joint SDE for `y = (x, γ, α)` at time `s`.
pub fn augmented_coefficients(
    model: &SdeModel,
    y: [f64; 3],
    s: f64,
) -> Result<AugmentedCoefficients> {
    let [x, gamma, alpha] = y;
    let (sg, sg1, sg2) = model.sigma.eval(x, s);
    let (r, r1, r2) = model.drift.eval(x, s);
    let src = if model.error_source.brownian() {
        1.0
    } else {
        0.0
    };
    let out = AugmentedCoefficients {
        diffusion: [
            sg,
            2.0 * sg1 * gamma,
            -0.5 * sg * src + 0.5 * sg2 * gamma + sg1 * alpha,
        ],
        drift: [
            r,
            sg * sg * src + (2.0 * r1 + sg1 * sg1) * gamma,
            0.5 * r2 * gamma + r1 * alpha,
        ],
    };
    if out
        .diffusion
        .iter()
        .chain(out.drift.iter())
        .all(|v| v.is_finite())
    {
        Ok(out)
    } else {
        Err(Error::NonFiniteCoefficient { x, t: s })
    }
}

/// Final state of the augmented recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: f64,
    pub gamma: f64,
    pub a: f64,
    /// `Γ[X^n, Γ[X^n]]`; tracked only by the chain-rule scheme.
    pub gamma_gamma: Option<f64>,
    /// `(x, γ, a)` at every grid time when recording.
    pub path: Option<Vec<[f64; 3]>>,
}

/// `n` Brownian increments `√Δt · Z_k`.
pub fn draw_increments(model: &SdeModel, cfg: &EulerConfig, rng: &mut RngStream) -> Vec<f64> {
    let sd = (model.horizon / cfg.steps as f64).sqrt();
    (0..cfg.steps).map(|_| sd * rng.standard_normal()).collect()
}

/// Run the augmented recursion on given increments.
pub fn run_increments(
    model: &SdeModel,
    cfg: &EulerConfig,
    increments: &[f64],
) -> Result<AugmentedState> {
    if increments.len() != cfg.steps {
        return Err(Error::DimensionMismatch {
            expected: cfg.steps,
            found: increments.len(),
        });
    }
    let dt = model.horizon / cfg.steps as f64;
    let brownian = model.error_source.brownian();
    // Γ[ΔB] and the A[ΔB] = −ΔB/2 switch
    let beta = if brownian { dt } else { 0.0 };
    let lambda = if brownian { 1.0 } else { 0.0 };

    let mut x = model.x0;
    let mut g = model.error_source.initial_variance();
    let mut a = model.initial_bias;
    let mut c = 0.0;
    let mut path = cfg.record_path.then(|| {
        let mut p = Vec::with_capacity(cfg.steps + 1);
        p.push([x, g, a]);
        p
    });

    for (k, &db) in increments.iter().enumerate() {
        let t = k as f64 * dt;
        let (s0, s1, s2) = model.sigma.eval(x, t);
        let (r0, r1, r2) = model.drift.eval(x, t);
        if ![s0, s1, s2, r0, r1, r2].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteCoefficient { x, t });
        }
        // ∂X'/∂X and ∂²X'/∂X²
        let m = 1.0 + s1 * db + r1 * dt;
        let q = s2 * db + r2 * dt;

        let x_next = x + s0 * db + r0 * dt;
        let a_next = m * a + 0.5 * q * g - 0.5 * s0 * db * lambda;
        let (g_next, c_next) = match cfg.scheme {
            AugmentedScheme::ChainRule => {
                let g_next = m * m * g + s0 * s0 * beta;
                let dg_dx = 2.0 * m * q * g + 2.0 * s0 * s1 * beta;
                let c_next = m * (dg_dx * g + m * m * c) + 2.0 * m * s0 * s1 * g * beta;
                (g_next, c_next)
            }
            AugmentedScheme::Euler => {
                let g_next =
                    g + 2.0 * s1 * g * db + (s0 * s0 * lambda + (2.0 * r1 + s1 * s1) * g) * dt;
                (g_next, f64::NAN)
            }
        };
        x = x_next;
        g = g_next;
        a = a_next;
        c = c_next;

        let bad = |v: f64| !v.is_finite() || v.abs() > EXPLOSION_BOUND;
        if bad(x) || bad(g) || bad(a) || (cfg.scheme == AugmentedScheme::ChainRule && bad(c)) {
            return Err(Error::Explosion { step: k });
        }
        if let Some(p) = path.as_mut() {
            p.push([x, g, a]);
        }
    }
    Ok(AugmentedState {
        x,
        gamma: g,
        a,
        gamma_gamma: (cfg.scheme == AugmentedScheme::ChainRule).then_some(c),
        path,
    })
}

pub fn euler_triplet(
    model: &SdeModel,
    cfg: &EulerConfig,
    rng: &mut RngStream,
) -> Result<TripletSample> {
    let inc = draw_increments(model, cfg, rng);
    let st = run_increments(model, cfg, &inc)?;
    Ok(TripletSample::scalar(st.x, st.gamma, st.a))
}

/// Like [`euler_triplet`] but also returns `Γ[X^n, Γ[X^n]]`.
///
/// A final `Γ[X^n] = 0` is not an error; it shows up as
/// [`ExtendedSample::is_degenerate`].
pub fn euler_extended(
    model: &SdeModel,
    cfg: &EulerConfig,
    rng: &mut RngStream,
) -> Result<ExtendedSample> {
    if cfg.scheme != AugmentedScheme::ChainRule {
        return Err(Error::Unsupported(
            "extended sampling with the Euler Γ-recursion",
        ));
    }
    let inc = draw_increments(model, cfg, rng);
    let st = run_increments(model, cfg, &inc)?;
    Ok(ExtendedSample::new(
        st.x,
        st.gamma,
        st.a,
        st.gamma_gamma.expect("chain-rule scheme tracks Γ[X, Γ[X]]"),
    ))
}

/// Record the whole `(x, γ, a)` path on the grid.
pub fn euler_path(
    model: &SdeModel,
    cfg: &EulerConfig,
    rng: &mut RngStream,
) -> Result<Vec<[f64; 3]>> {
    let cfg = cfg.recording();
    let inc = draw_increments(model, &cfg, rng);
    Ok(run_increments(model, &cfg, &inc)?.path.unwrap_or_default())
}

/// Compare supplied derivatives of σ and r against central differences at
/// random `(x, t)` with `x ∈ x0 ± 2·max(1, |x0|)` and `t ∈ [0, T]`.
pub fn derivative_selftest(
    model: &SdeModel,
    probes: usize,
    rng: &mut RngStream,
) -> Result<SelfTestReport> {
    if probes == 0 {
        return Err(invalid("probes", "must be ≥ 1"));
    }
    let half_width = 2.0 * model.x0.abs().max(1.0);
    let mut chk = Checker::new();
    for _ in 0..probes {
        let x = model.x0 + half_width * (2.0 * rng.uniform() - 1.0);
        let t = model.horizon * rng.uniform();
        for (name, c) in [("sigma", &model.sigma), ("drift", &model.drift)] {
            chk.check(&format!("{name}_x"), |y| (c.value)(y, t), (c.dx)(x, t), x);
            chk.check(&format!("{name}_xx"), |y| (c.dx)(y, t), (c.dxx)(x, t), x);
        }
    }
    Ok(chk.finish())
}

/// [`StructureProvider`] over an SDE model and a discretization.
#[derive(Clone)]
pub struct WienerProvider {
    pub model: SdeModel,
    pub cfg: EulerConfig,
    density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl WienerProvider {
    pub fn new(model: SdeModel, cfg: EulerConfig) -> Self {
        Self {
            model,
            cfg,
            density: None,
        }
    }

    /// Attach the exact density of `X_T` (validation models only).
    pub fn with_exact_density(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.density = Some(Arc::new(f));
        self
    }
}

impl fmt::Debug for WienerProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WienerProvider")
            .field("model", &self.model)
            .field("cfg", &self.cfg)
            .finish()
    }
}

impl StructureProvider for WienerProvider {
    fn dimension(&self) -> usize {
        1
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            triplet: true,
            extended: self.cfg.scheme == AugmentedScheme::ChainRule,
            known_density: self.density.is_some(),
        }
    }

    fn sample_triplet(&self, rng: &mut RngStream) -> Result<TripletSample> {
        euler_triplet(&self.model, &self.cfg, rng)
    }

    fn sample_extended(&self, rng: &mut RngStream) -> Result<ExtendedSample> {
        euler_extended(&self.model, &self.cfg, rng)
    }

    fn exact_density(&self, x: f64) -> Option<f64> {
        self.density.as_ref().map(|f| f(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_substream;

    fn geometric(error_source: ErrorSource) -> SdeModel {
        SdeModel::new(
            2.0,
            1.0,
            Coefficient::linear(1.0),
            Coefficient::constant(0.0),
            error_source,
        )
        .unwrap()
    }

    #[test]
    fn coefficients_of_linear_sigma() {
        let m = geometric(ErrorSource::Brownian);
        let c = augmented_coefficients(&m, [2.0, 1.0, 0.5], 0.3).unwrap();
        assert_eq!(c.diffusion, [2.0, 2.0, -0.5]);
        assert_eq!(c.drift, [0.0, 5.0, 0.0]);
    }

    #[test]
    fn coefficients_of_constant_sigma() {
        let m = SdeModel::new(
            0.0,
            1.0,
            Coefficient::constant(1.7),
            Coefficient::constant(0.0),
            ErrorSource::Brownian,
        )
        .unwrap();
        let c = augmented_coefficients(&m, [0.4, 2.0, -1.0], 0.0).unwrap();
        assert_eq!(c.diffusion, [1.7, 0.0, -0.85]);
        assert!((c.drift[1] - 1.7 * 1.7).abs() < 1e-15);
        assert_eq!([c.drift[0], c.drift[2]], [0.0, 0.0]);
    }

    #[test]
    fn initial_only_drops_source_terms() {
        let m = geometric(ErrorSource::Initial { variance: 0.1 });
        let c = augmented_coefficients(&m, [2.0, 1.0, 0.5], 0.0).unwrap();
        assert_eq!(c.drift[1], 1.0);
        assert_eq!(c.diffusion[2], 0.5);
    }

    #[test]
    fn non_finite_coefficient_reports_location() {
        let m = SdeModel::new(
            0.0,
            1.0,
            Coefficient::new(
                |x, _| 1.0 / x,
                |x, _| -1.0 / (x * x),
                |x, _| 2.0 / (x * x * x),
            ),
            Coefficient::constant(0.0),
            ErrorSource::Brownian,
        )
        .unwrap();
        assert_eq!(
            augmented_coefficients(&m, [0.0, 0.0, 0.0], 0.5),
            Err(Error::NonFiniteCoefficient { x: 0.0, t: 0.5 })
        );
    }

    #[test]
    fn constant_sigma_closed_form() {
        let m = SdeModel::new(
            0.0,
            1.0,
            Coefficient::constant(1.0),
            Coefficient::constant(0.0),
            ErrorSource::Brownian,
        )
        .unwrap();
        let cfg = EulerConfig::new(16).unwrap().recording();
        let mut rng = derive_substream(3, 0, 0);
        let inc = draw_increments(&m, &cfg, &mut rng);
        let st = run_increments(&m, &cfg, &inc).unwrap();
        let path = st.path.as_ref().unwrap();
        let mut bsum = 0.0;
        for (k, state) in path.iter().enumerate() {
            // Γ_k = t_k, A_k = −½ Σ ΔB
            assert!((state[1] - k as f64 / 16.0).abs() < 1e-14);
            assert_eq!(state[2], -0.5 * bsum);
            if k < 16 {
                bsum += inc[k];
            }
        }
        assert!((st.gamma - 1.0).abs() < 1e-14);
        assert_eq!(st.a, -0.5 * st.x);
        assert_eq!(st.gamma_gamma, Some(0.0));
    }

    #[test]
    fn zero_initial_error_stays_zero() {
        let m = SdeModel::new(
            0.3,
            1.0,
            Coefficient::constant(0.8),
            Coefficient::affine(0.1, -0.5),
            ErrorSource::Initial { variance: 0.0 },
        )
        .unwrap();
        let cfg = EulerConfig::new(32).unwrap();
        let st = run_increments(
            &m,
            &cfg,
            &draw_increments(&m, &cfg, &mut derive_substream(1, 2, 3)),
        )
        .unwrap();
        assert_eq!(st.gamma, 0.0);
        assert_eq!(st.a, 0.0);
    }

    #[test]
    fn wrong_increment_count_is_rejected() {
        let m = geometric(ErrorSource::Brownian);
        let cfg = EulerConfig::new(3).unwrap();
        assert!(matches!(
            run_increments(&m, &cfg, &[0.1, 0.2]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn explosion_carries_step_index() {
        let m = SdeModel::new(
            1.0,
            1.0,
            Coefficient::constant(0.0),
            Coefficient::linear(1e3),
            ErrorSource::Brownian,
        )
        .unwrap();
        let cfg = EulerConfig::new(10).unwrap();
        match run_increments(&m, &cfg, &[0.0; 10]) {
            Err(Error::Explosion { step }) => assert!(step < 10),
            other => panic!("expected explosion, got {other:?}"),
        }
    }

    #[test]
    fn selftest_accepts_correct_and_rejects_wrong() {
        let mut rng = derive_substream(9, 0, 0);
        let ok = geometric(ErrorSource::Brownian);
        assert!(derivative_selftest(&ok, 50, &mut rng).unwrap().passed);

        let wrong = SdeModel::new(
            0.0,
            1.0,
            Coefficient::new(|x, _| x, |_, _| 0.0, |_, _| 0.0),
            Coefficient::constant(0.0),
            ErrorSource::Brownian,
        )
        .unwrap();
        let r = derivative_selftest(&wrong, 5, &mut rng).unwrap();
        assert!(!r.passed);
        assert!(r.worst.unwrap().contains("sigma_x"));

        let sine = SdeModel::new(
            0.0,
            1.0,
            Coefficient::constant(1.0),
            Coefficient::new(|x, _| x.sin(), |x, _| x.cos(), |x, _| -x.sin()),
            ErrorSource::Brownian,
        )
        .unwrap();
        assert!(derivative_selftest(&sine, 50, &mut rng).unwrap().passed);
    }

    #[test]
    fn invalid_models_are_rejected() {
        let s = || Coefficient::constant(1.0);
        assert!(SdeModel::new(0.0, 0.0, s(), s(), ErrorSource::Brownian).is_err());
        assert!(
            SdeModel::new(0.0, 1.0, s(), s(), ErrorSource::Initial { variance: -1.0 }).is_err()
        );
        assert!(EulerConfig::new(0).is_err());
    }

    #[test]
    fn euler_extended_refuses_euler_scheme() {
        let m = geometric(ErrorSource::Brownian);
        let cfg = EulerConfig::new(4)
            .unwrap()
            .with_scheme(AugmentedScheme::Euler);
        assert!(matches!(
            euler_extended(&m, &cfg, &mut derive_substream(0, 0, 0)),
            Err(Error::Unsupported(_))
        ));
    }
}
