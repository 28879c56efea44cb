//! Sample types shared by every simulator and estimator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Default absolute tolerance on eigenvalues and symmetry for [`validate_triplet`].
pub const PSD_TOLERANCE: f64 = 1e-9;

/// One draw of `X`, the square-field matrix `Γ[X_i, X_j]` and the generator vector `A[X_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletSample {
    pub x: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub a: DVector<f64>,
}

impl TripletSample {
    pub fn new(x: DVector<f64>, gamma: DMatrix<f64>, a: DVector<f64>) -> Self {
        debug_assert_eq!(x.len(), a.len());
        debug_assert_eq!(gamma.shape(), (x.len(), x.len()));
        Self { x, gamma, a }
    }

    pub fn scalar(x: f64, gamma: f64, a: f64) -> Self {
        Self {
            x: DVector::from_element(1, x),
            gamma: DMatrix::from_element(1, 1, gamma),
            a: DVector::from_element(1, a),
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(x, Γ, A)` of a one-dimensional sample.
    ///
    /// Panics if `d != 1`.
    pub fn scalar_parts(&self) -> (f64, f64, f64) {
        assert_eq!(
            self.dim(),
            1,
            "scalar_parts on a {}-dimensional sample",
            self.dim()
        );
        (self.x[0], self.gamma[(0, 0)], self.a[0])
    }
}

/// Value of a bounded functional `G` carried alongside a sample, with `Γ[X, G]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayloadValue {
    pub g: f64,
    pub gamma_xg: f64,
}

/// Scalar draw carrying the extra ingredients of the sign formulas.
///
/// Only `Γ[X, Γ[X]]` is stored; `Γ[X, 1/(ε+Γ[X])]` is derived per ε by the
/// chain rule in [`ExtendedSample::gamma_x_inv`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSample {
    pub base: TripletSample,
    pub gamma_gamma: f64,
    pub payload: Option<PayloadValue>,
}

impl ExtendedSample {
    pub fn new(x: f64, gamma: f64, a: f64, gamma_gamma: f64) -> Self {
        Self {
            base: TripletSample::scalar(x, gamma, a),
            gamma_gamma,
            payload: None,
        }
    }

    pub fn x(&self) -> f64 {
        self.base.x[0]
    }

    pub fn gamma(&self) -> f64 {
        self.base.gamma[(0, 0)]
    }

    pub fn a(&self) -> f64 {
        self.base.a[0]
    }

    /// `Γ[X, 1/(ε + Γ[X])] = −Γ[X, Γ[X]] / (ε + Γ[X])²`.
    pub fn gamma_x_inv(&self, eps: f64) -> f64 {
        let s = eps + self.gamma();
        -self.gamma_gamma / (s * s)
    }

    /// `Γ[X] = 0`: the ε = 0 formulas are undefined for this draw.
    pub fn is_degenerate(&self) -> bool {
        self.gamma() == 0.0
    }

    pub fn with_payload(mut self, payload: &Payload) -> Self {
        let x = self.x();
        self.payload = Some(PayloadValue {
            g: (payload.g)(x),
            gamma_xg: (payload.dg)(x) * self.gamma(),
        });
        self
    }
}

/// A bounded functional of the form `G = φ(X)`.
///
/// `Γ[X, φ(X)] = φ′(X) Γ[X]` holds in every error structure, so the payload
/// can be attached to samples from any provider.
#[derive(Clone)]
pub struct Payload {
    pub name: &'static str,
    pub g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub dg: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Payload {
    pub fn new(
        name: &'static str,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name,
            g: Arc::new(g),
            dg: Arc::new(dg),
        }
    }

    pub fn one() -> Self {
        Self::new("one", |_| 1.0, |_| 0.0)
    }

    pub fn cosine() -> Self {
        Self::new("cos", f64::cos, |x| -x.sin())
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payload").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationReport {
    /// `max |γ_ij − γ_ji|`
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub has_non_finite: bool,
    pub passed: bool,
}

/// Check symmetry, positive semi-definiteness and finiteness of a sample.
pub fn validate_triplet(s: &TripletSample, tol: f64) -> ValidationReport {
    let has_non_finite =
        s.x.iter()
            .chain(s.gamma.iter())
            .chain(s.a.iter())
            .any(|v| !v.is_finite());
    if has_non_finite {
        return ValidationReport {
            max_asymmetry: f64::NAN,
            min_eigenvalue: f64::NAN,
            has_non_finite,
            passed: false,
        };
    }
    let d = s.dim();
    let mut max_asymmetry = 0.0_f64;
    for i in 0..d {
        for j in (i + 1)..d {
            max_asymmetry = max_asymmetry.max((s.gamma[(i, j)] - s.gamma[(j, i)]).abs());
        }
    }
    let min_eigenvalue = if d == 1 {
        s.gamma[(0, 0)]
    } else {
        let sym = (&s.gamma + s.gamma.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    };
    ValidationReport {
        max_asymmetry,
        min_eigenvalue,
        has_non_finite,
        passed: max_asymmetry <= tol && min_eigenvalue >= -tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn unit_scalar_passes_at_zero_tolerance() {
        let s = TripletSample::scalar(0.0, 1.0, 0.0);
        assert!(validate_triplet(&s, 0.0).passed);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let s = TripletSample::new(
            DVector::zeros(2),
            dmatrix![0.0, 1.0; 1.0, 0.0],
            DVector::zeros(2),
        );
        let r = validate_triplet(&s, 1e-9);
        assert!(!r.passed);
        assert!((r.min_eigenvalue + 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_asymmetry_within_tolerance() {
        let s = TripletSample::new(
            DVector::zeros(2),
            dmatrix![1e-13, 1e-14; 0.0, 1e-13],
            DVector::zeros(2),
        );
        let r = validate_triplet(&s, 1e-9);
        assert!(r.passed, "{r:?}");
        assert!((r.max_asymmetry - 1e-14).abs() < 1e-20);
    }

    #[test]
    fn nan_is_reported() {
        let s = TripletSample::scalar(f64::NAN, 1.0, 0.0);
        let r = validate_triplet(&s, 1e-9);
        assert!(r.has_non_finite && !r.passed);
    }

    #[test]
    fn payload_uses_chain_rule() {
        let s = ExtendedSample::new(0.3, 2.0, 0.0, 0.0).with_payload(&Payload::cosine());
        let p = s.payload.unwrap();
        assert_eq!(p.g, 0.3f64.cos());
        assert_eq!(p.gamma_xg, -(0.3f64.sin()) * 2.0);
    }

    #[test]
    fn inverse_gamma_is_derived_from_gamma_gamma() {
        let s = ExtendedSample::new(0.0, 5.0, 0.0, 5.0);
        assert!((s.gamma_x_inv(0.0) + 0.2).abs() < 1e-15);
        assert!((s.gamma_x_inv(1.0) + 5.0 / 36.0).abs() < 1e-15);
    }
}
