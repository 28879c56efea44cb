//! Running moments with a fixed, sequential summation order.

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let delta = v - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (v - self.mean);
    }

    /// Combine with the moments of a disjoint batch.
    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two values).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for v in iter {
            m.push(v);
        }
        m
    }
}

/// A value with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_moments(m: &Moments) -> Self {
        Self {
            value: m.mean(),
            stderr: m.std_error(),
        }
    }

    /// `|value − target| ≤ k · stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn merge_matches_single_pass() {
        let v: Vec<f64> = (0..37)
            .map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.0)
            .collect();
        let all: super::Moments = v.iter().copied().collect();
        let mut a: super::Moments = v[..10].iter().copied().collect();
        a.merge(&v[10..].iter().copied().collect());
        assert_eq!(a.count(), all.count());
        assert!((a.mean() - all.mean()).abs() < 1e-13);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    use super::*;

    #[test]
    fn matches_two_pass_formulas() {
        let v = [1.0, 2.0, 4.0, 7.0, 11.0];
        let m: Moments = v.iter().copied().collect();
        let mean = v.iter().sum::<f64>() / 5.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((m.mean() - mean).abs() < 1e-14);
        assert!((m.variance() - var).abs() < 1e-12);
        assert!((m.std_error() - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_stream_has_zero_variance() {
        let m: Moments = std::iter::repeat_n(0.25, 1000).collect();
        assert_eq!(m.variance(), 0.0);
    }
}
