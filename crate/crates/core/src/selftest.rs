//! Finite-difference checks of caller-supplied derivatives.

/// Relative tolerance for supplied derivatives.
pub const DERIVATIVE_RTOL: f64 = 1e-5;

/// Values below this magnitude are compared absolutely.
const NEGLIGIBLE: f64 = 1e-8;

/// Outcome of a derivative self-test.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub probes: usize,
    pub max_rel_error: f64,
    /// Description of the worst probe, if any failed.
    pub worst: Option<String>,
    pub passed: bool,
}

pub(crate) struct Checker {
    probes: usize,
    max_rel_error: f64,
    worst: Option<String>,
}

impl Checker {
    pub(crate) fn new() -> Self {
        Self {
            probes: 0,
            max_rel_error: 0.0,
            worst: None,
        }
    }

    /// Compare `supplied` with a central difference of `f` at `x`.
    pub(crate) fn check(&mut self, what: &str, f: impl Fn(f64) -> f64, supplied: f64, x: f64) {
        self.probes += 1;
        let h = 1e-4 * x.abs().max(1.0);
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        let scale = fd.abs().max(supplied.abs());
        let err = if scale <= NEGLIGIBLE {
            0.0
        } else {
            (fd - supplied).abs() / scale
        };
        if !err.is_finite() || err > self.max_rel_error {
            self.max_rel_error = if err.is_finite() { err } else { f64::INFINITY };
            if !(err <= DERIVATIVE_RTOL) {
                self.worst = Some(format!(
                    "{what} at {x}: supplied {supplied}, finite difference {fd}"
                ));
            }
        }
    }

    pub(crate) fn finish(self) -> SelfTestReport {
        SelfTestReport {
            probes: self.probes,
            max_rel_error: self.max_rel_error,
            passed: self.max_rel_error <= DERIVATIVE_RTOL,
            worst: self.worst,
        }
    }
}
