//! Least-squares slopes on log-log data.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval on the slope (infinite with two points).
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r_squared: f64,
}

impl SlopeFit {
    pub fn contains(&self, target: f64) -> bool {
        self.ci_lo <= target && target <= self.ci_hi
    }
}

/// Fit `y = intercept + slope · x` by ordinary least squares.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: n,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("x", "abscissae must not all coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let (slope_stderr, half) = if n > 2 {
        let se = (sse / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        (se, t * se)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        slope_stderr,
        ci_lo: slope - half,
        ci_hi: slope + half,
        r_squared,
    })
}

/// Fit `log y = c + slope · log x`. All values must be positive.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("data", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        let f = fit_loglog(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.contains(-0.5));
    }

    #[test]
    fn noisy_line_interval() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [0.1, 1.9, 4.2, 5.8, 8.1, 9.9];
        let f = fit_line(&xs, &ys).unwrap();
        assert!(f.contains(2.0));
        assert!(f.ci_hi - f.ci_lo < 0.5);
    }

    #[test]
    fn single_point_cannot_fit() {
        assert_eq!(
            fit_line(&[1.0], &[1.0]),
            Err(Error::TooFewPoints {
                required: 2,
                got: 1
            })
        );
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    }
}
