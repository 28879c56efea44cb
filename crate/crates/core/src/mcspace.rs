//! Monte Carlo space: `X = F(U_0..U_{m-1}; V_0..V_{k-1})` with i.i.d. uniform
//! coordinates. The smooth coordinates `U_i` carry the product structure
//! `γ[u](x) = x²(1−x)² u′(x)²`; the irregular `V_j` carry no error.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::provider::{Capabilities, StructureProvider};
use crate::rng::RngStream;
use crate::sample::{ExtendedSample, TripletSample};
use crate::selftest::{Checker, SelfTestReport};

type Field = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type VecField = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// `(w(u), w′(u)) = (u²(1−u)², 2u(1−u)(1−2u))`.
pub fn coordinate_weights(u: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid("u", format!("coordinate {u} outside [0, 1]")));
    }
    let v = u * (1.0 - u);
    Ok((v * v, 2.0 * v * (1.0 - 2.0 * u)))
}

/// A functional of `m` smooth and `k` irregular uniform coordinates with its
/// partial derivatives in the smooth ones.
#[derive(Clone)]
pub struct McFunctional {
    pub m: usize,
    pub k: usize,
    pub f: Field,
    /// `F′_i`, length `m`.
    pub grad: VecField,
    /// `F″_ii`, length `m`.
    pub hess_diag: VecField,
    /// Row-major `F″_ij`, `m × m`. Needed for extended sampling only.
    pub hess: Option<VecField>,
}

impl fmt::Debug for McFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McFunctional")
            .field("m", &self.m)
            .field("k", &self.k)
            .field("hess", &self.hess.is_some())
            .finish()
    }
}

impl McFunctional {
    pub fn new(
        m: usize,
        k: usize,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess_diag: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            m,
            k,
            f: Arc::new(f),
            grad: Arc::new(grad),
            hess_diag: Arc::new(hess_diag),
            hess: None,
        }
    }

    pub fn with_hessian(
        mut self,
        hess: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    /// `F = U_0`
    pub fn identity() -> Self {
        Self::new(1, 0, |u, _| u[0], |_, _| vec![1.0], |_, _| vec![0.0])
            .with_hessian(|_, _| vec![0.0])
    }

    /// `F = Σ U_i`
    pub fn sum(m: usize) -> Self {
        Self::new(
            m,
            0,
            |u, _| u.iter().sum(),
            move |_, _| vec![1.0; m],
            move |_, _| vec![0.0; m],
        )
        .with_hessian(move |_, _| vec![0.0; m * m])
    }

    /// `F = U_0²`
    pub fn square() -> Self {
        Self::new(
            1,
            0,
            |u, _| u[0] * u[0],
            |u, _| vec![2.0 * u[0]],
            |_, _| vec![2.0],
        )
        .with_hessian(|_, _| vec![2.0])
    }
}

fn weights(u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    u.iter()
        .map(|&ui| coordinate_weights(ui))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

/// `(X, Γ[X], A[X])` at given coordinates.
pub fn mc_triplet_at(model: &McFunctional, u: &[f64], v: &[f64]) -> Result<TripletSample> {
    let (w, dw) = weights(u)?;
    let x = (model.f)(u, v);
    let g1 = (model.grad)(u, v);
    let g2 = (model.hess_diag)(u, v);
    let mut gamma = 0.0;
    let mut a = 0.0;
    for i in 0..model.m {
        gamma += g1[i] * g1[i] * w[i];
        // ½F″_ii·U²(1−U)² + F′_i·U(1−U)(1−2U)
        a += 0.5 * g2[i] * w[i] + 0.5 * g1[i] * dw[i];
    }
    Ok(TripletSample::scalar(x, gamma, a))
}

/// Adds `Γ[X, Γ[X]] = Σ_i F′_i w(U_i) ∂_iΓ[X]`, with
/// `∂_iΓ[X] = Σ_j 2F′_j F″_ji w(U_j) + F′_i² w′(U_i)`.
pub fn mc_extended_at(model: &McFunctional, u: &[f64], v: &[f64]) -> Result<ExtendedSample> {
    let hess = model.hess.as_ref().ok_or(Error::Unsupported(
        "extended sampling without mixed partials",
    ))?;
    let base = mc_triplet_at(model, u, v)?;
    let (w, dw) = weights(u)?;
    let g1 = (model.grad)(u, v);
    let h = hess(u, v);
    let m = model.m;
    let mut gg = 0.0;
    for i in 0..m {
        let mut d_gamma = g1[i] * g1[i] * dw[i];
        for j in 0..m {
            d_gamma += 2.0 * g1[j] * h[j * m + i] * w[j];
        }
        gg += g1[i] * w[i] * d_gamma;
    }
    Ok(ExtendedSample {
        base,
        gamma_gamma: gg,
        payload: None,
    })
}

fn draw(model: &McFunctional, rng: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
    let u = (0..model.m).map(|_| rng.uniform()).collect();
    let v = (0..model.k).map(|_| rng.uniform()).collect();
    (u, v)
}

pub fn sample_mc_triplet(model: &McFunctional, rng: &mut RngStream) -> Result<TripletSample> {
    let (u, v) = draw(model, rng);
    mc_triplet_at(model, &u, &v)
}

pub fn sample_mc_extended(model: &McFunctional, rng: &mut RngStream) -> Result<ExtendedSample> {
    let (u, v) = draw(model, rng);
    mc_extended_at(model, &u, &v)
}

/// Finite-difference check of the supplied partials at interior points
/// `U_i ∈ [0.05, 0.95]`.
pub fn functional_selftest(
    model: &McFunctional,
    probes: usize,
    rng: &mut RngStream,
) -> Result<SelfTestReport> {
    if probes == 0 {
        return Err(invalid("probes", "must be ≥ 1"));
    }
    let m = model.m;
    let mut chk = Checker::new();
    for _ in 0..probes {
        let u: Vec<f64> = (0..m).map(|_| 0.05 + 0.9 * rng.uniform()).collect();
        let v: Vec<f64> = (0..model.k).map(|_| rng.uniform()).collect();
        let g1 = (model.grad)(&u, &v);
        let g2 = (model.hess_diag)(&u, &v);
        let h = model.hess.as_ref().map(|h| h(&u, &v));
        for i in 0..m {
            let along = |t: f64| {
                let mut w = u.clone();
                w[i] = t;
                w
            };
            chk.check("F'_i", |t| (model.f)(&along(t), &v), g1[i], u[i]);
            chk.check("F''_ii", |t| (model.grad)(&along(t), &v)[i], g2[i], u[i]);
            if let Some(h) = &h {
                for j in 0..m {
                    chk.check(
                        "F''_ij",
                        |t| (model.grad)(&along(t), &v)[j],
                        h[j * m + i],
                        u[i],
                    );
                }
            }
        }
    }
    Ok(chk.finish())
}

#[derive(Clone)]
pub struct McSpaceProvider {
    pub model: McFunctional,
    density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for McSpaceProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("McSpaceProvider")
            .field("model", &self.model)
            .finish_non_exhaustive()
    }
}

impl McSpaceProvider {
    pub fn new(model: McFunctional) -> Self {
        Self {
            model,
            density: None,
        }
    }

    pub fn with_exact_density(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.density = Some(Arc::new(f));
        self
    }
}

impl StructureProvider for McSpaceProvider {
    fn dimension(&self) -> usize {
        1
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            triplet: true,
            extended: self.model.hess.is_some(),
            known_density: self.density.is_some(),
        }
    }

    fn sample_triplet(&self, rng: &mut RngStream) -> Result<TripletSample> {
        sample_mc_triplet(&self.model, rng)
    }

    fn sample_extended(&self, rng: &mut RngStream) -> Result<ExtendedSample> {
        sample_mc_extended(&self.model, rng)
    }

    fn exact_density(&self, x: f64) -> Option<f64> {
        self.density.as_ref().map(|f| f(x))
    }
}
