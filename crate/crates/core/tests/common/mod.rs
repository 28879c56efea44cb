//! Hyper-dual oracle for the augmented Euler recursion: the Euler map is
//! re-run in hyper-dual arithmetic, which gives exact first and mixed second
//! partials of `X^n` in the increments, and the Ornstein–Uhlenbeck calculus
//! `Γ[ΔB_k] = Δt`, `A[ΔB_k] = −ΔB_k/2` is applied to them directly.

#![allow(dead_code)]

use std::ops::{Add, Mul, Sub};

use dirichlet_mc::wiener::{Coefficient, ErrorSource, SdeModel};

#[derive(Debug, Clone, Copy)]
struct HyperDual {
    re: f64,
    e1: f64,
    e2: f64,
    e12: f64,
}

impl HyperDual {
    fn constant(re: f64) -> Self {
        Self {
            re,
            e1: 0.0,
            e2: 0.0,
            e12: 0.0,
        }
    }

    /// Apply a scalar function with its first two derivatives.
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }

    fn sin(self) -> Self {
        self.lift(self.re.sin(), self.re.cos(), -self.re.sin())
    }

    fn cos(self) -> Self {
        self.lift(self.re.cos(), -self.re.sin(), -self.re.cos())
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e12: self.e12 + o.e12,
        }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + o * HyperDual::constant(-1.0)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

/// `σ(x) = s0 + s1·x + s2·sin x`, `r(x) = r0 + r1·x + r2·cos x`.
#[derive(Debug, Clone, Copy)]
pub struct Params {
    pub s: [f64; 3],
    pub r: [f64; 3],
    pub x0: f64,
}

impl Params {
    fn sigma(&self, x: HyperDual) -> HyperDual {
        let c = HyperDual::constant;
        c(self.s[0]) + c(self.s[1]) * x + c(self.s[2]) * x.sin()
    }

    fn drift(&self, x: HyperDual) -> HyperDual {
        let c = HyperDual::constant;
        c(self.r[0]) + c(self.r[1]) * x + c(self.r[2]) * x.cos()
    }

    pub fn model(&self, horizon: f64) -> SdeModel {
        let [s0, s1, s2] = self.s;
        let [r0, r1, r2] = self.r;
        SdeModel::new(
            self.x0,
            horizon,
            Coefficient::new(
                move |x, _| s0 + s1 * x + s2 * x.sin(),
                move |x, _| s1 + s2 * x.cos(),
                move |x, _| -s2 * x.sin(),
            ),
            Coefficient::new(
                move |x, _| r0 + r1 * x + r2 * x.cos(),
                move |x, _| r1 - r2 * x.sin(),
                move |x, _| -r2 * x.cos(),
            ),
            ErrorSource::Brownian,
        )
        .unwrap()
    }

    /// `X^n` with increment `i` tagged by `e1` and increment `j` by `e2`.
    fn euler(&self, dt: f64, inc: &[f64], i: usize, j: usize) -> HyperDual {
        let mut x = HyperDual::constant(self.x0);
        for (k, &db) in inc.iter().enumerate() {
            let mut b = HyperDual::constant(db);
            if k == i {
                b.e1 = 1.0;
            }
            if k == j {
                b.e2 = 1.0;
            }
            x = x + self.sigma(x) * b + self.drift(x) * HyperDual::constant(dt);
        }
        x
    }

    /// `(Γ[X^n], A[X^n], Γ[X^n, Γ[X^n]])` from the partials.
    pub fn oracle(&self, dt: f64, inc: &[f64]) -> (f64, f64, f64) {
        let n = inc.len();
        let mut grad = vec![0.0; n];
        let mut hess = vec![vec![0.0; n]; n];
        for (i, row) in hess.iter_mut().enumerate() {
            for (j, h) in row.iter_mut().enumerate() {
                let v = self.euler(dt, inc, i, j);
                grad[i] = v.e1;
                *h = v.e12;
            }
        }
        let gamma: f64 = dt * grad.iter().map(|g| g * g).sum::<f64>();
        let a: f64 = (0..n)
            .map(|k| -0.5 * grad[k] * inc[k] + 0.5 * dt * hess[k][k])
            .sum();
        let gg: f64 = (0..n)
            .map(|k| {
                let d_gamma: f64 = 2.0 * dt * (0..n).map(|j| grad[j] * hess[j][k]).sum::<f64>();
                dt * grad[k] * d_gamma
            })
            .sum();
        (gamma, a, gg)
    }
}
