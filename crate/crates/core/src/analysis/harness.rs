//! Identity checks and convergence measurements driven by a provider.
//!
//! Large-N runs stream the samples in chunks; every chunk is drawn from the
//! same `(seed, family, index)` streams, so all ε (or `h`) values of one
//! curve share their random numbers.

use nalgebra::DVector;
use rayon::prelude::*;

use super::fit::{fit_loglog, SlopeFit};
use super::oracle::KernelMeanOracle;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    classical_bandwidth, classical_kde, direct_density_grid, direct_terms, epsilon_rule, grid_1d,
    random_kernel_density, ClassicalKernel, Criterion, EpsilonChoice, EstimatorConfig, Method,
    PreparedKernel, RandomKernel, DEFAULT_RIDGE,
};
use crate::provider::{sample_extended, sample_triplets, sample_triplets_range, StructureProvider};
use crate::sample::{ExtendedSample, TripletSample};
use crate::stats::{Estimate, Moments};

const CHUNK: usize = 1 << 16;

/// A `C²` test function with bounded derivatives.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub d1: fn(f64) -> f64,
    pub d2: fn(f64) -> f64,
}

impl TestFunction {
    pub fn square() -> Self {
        Self {
            name: "x^2",
            f: |x| x * x,
            d1: |x| 2.0 * x,
            d2: |_| 2.0,
        }
    }

    pub fn identity() -> Self {
        Self {
            name: "x",
            f: |x| x,
            d1: |_| 1.0,
            d2: |_| 0.0,
        }
    }

    pub fn cos() -> Self {
        Self {
            name: "cos",
            f: f64::cos,
            d1: |x| -x.sin(),
            d2: |x| -x.cos(),
        }
    }

    pub fn tanh() -> Self {
        Self {
            name: "tanh",
            f: f64::tanh,
            d1: |x| 1.0 - x.tanh().powi(2),
            d2: |x| {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            },
        }
    }

    pub fn standard() -> [Self; 3] {
        [Self::square(), Self::cos(), Self::tanh()]
    }
}

fn require_scalar<P: StructureProvider + ?Sized>(provider: &P) -> Result<()> {
    match provider.dimension() {
        1 => Ok(()),
        d => Err(Error::DimensionMismatch {
            expected: 1,
            found: d,
        }),
    }
}

/// Mean of `φ′(X)A[X] + ½φ″(X)Γ[X]` for each `φ`; each must straddle zero.
pub fn ibp_residual<P: StructureProvider + ?Sized>(
    provider: &P,
    phis: &[TestFunction],
    n: usize,
    seed: u64,
    family: u64,
) -> Result<Vec<Estimate>> {
    require_scalar(provider)?;
    let mut acc = vec![Moments::new(); phis.len()];
    stream(provider, seed, family, n, |chunk| {
        for s in chunk {
            let (x, g, a) = s.scalar_parts();
            for (m, phi) in acc.iter_mut().zip(phis) {
                m.push((phi.d1)(x) * a + 0.5 * (phi.d2)(x) * g);
            }
        }
        Ok(())
    })?;
    Ok(acc.iter().map(Estimate::from_moments).collect())
}

fn stream<P: StructureProvider + ?Sized>(
    provider: &P,
    seed: u64,
    family: u64,
    n: usize,
    mut f: impl FnMut(&[TripletSample]) -> Result<()>,
) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let mut start = 0;
    while start < n {
        let count = CHUNK.min(n - start);
        f(&sample_triplets_range(
            provider, seed, family, start, count,
        )?)?;
        start += count;
    }
    Ok(())
}

/// Which Gaussian kernel a bias curve uses; the parameter is `ε` or `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    RandomKernel,
    Classical,
}

impl KernelMethod {
    fn prepare(&self, param: f64, ridge: f64, s: &TripletSample) -> Result<PreparedKernel> {
        match self {
            KernelMethod::RandomKernel => RandomKernel { eps: param, ridge }.prepare(s),
            KernelMethod::Classical => ClassicalKernel { h: param }.prepare(&s.x),
        }
    }

    /// Kernel value at `x`; a singular kernel contributes zero.
    fn value(&self, param: f64, ridge: f64, s: &TripletSample, x: &DVector<f64>) -> Result<f64> {
        match self.prepare(param, ridge, s) {
            Ok(k) => Ok(k.eval(x)),
            Err(Error::SingularKernel) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

/// Per-parameter moments of the kernel summand at `x`, over `n` streamed samples.
fn kernel_moments<P: StructureProvider + ?Sized>(
    provider: &P,
    method: KernelMethod,
    x: &DVector<f64>,
    params: &[f64],
    n: usize,
    seed: u64,
    family: u64,
) -> Result<Vec<Moments>> {
    if let Some(&p) = params.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(invalid(
            "parameter",
            format!("kernel parameters must be positive, got {p}"),
        ));
    }
    let mut acc = vec![Moments::new(); params.len()];
    stream(provider, seed, family, n, |chunk| {
        let values: Vec<Vec<f64>> = chunk
            .par_iter()
            .map(|s| {
                params
                    .iter()
                    .map(|&p| method.value(p, DEFAULT_RIDGE, s, x))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for row in values {
            for (m, v) in acc.iter_mut().zip(row) {
                m.push(v);
            }
        }
        Ok(())
    })?;
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    pub parameter: f64,
    pub estimate: Estimate,
    /// `estimate − f(x)`
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasCurve {
    pub method: KernelMethod,
    pub x: f64,
    pub exact: f64,
    pub points: Vec<BiasPoint>,
    /// Slope of `log |bias|` against `log parameter`.
    pub fit: SlopeFit,
}

/// Bias of a kernel estimator at `x` for each parameter, from `n` samples.
///
/// Fails with [`Error::NoiseFloor`] when some standard error exceeds a third
/// of the measured bias; `n` must then grow or the parameters move up.
pub fn bias_curve<P: StructureProvider + ?Sized>(
    provider: &P,
    method: KernelMethod,
    x: f64,
    params: &[f64],
    n: usize,
    seed: u64,
) -> Result<BiasCurve> {
    require_scalar(provider)?;
    if params.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: params.len(),
        });
    }
    let exact = provider
        .exact_density(x)
        .ok_or(Error::NoExactDensity("bias_curve"))?;
    let moments = kernel_moments(
        provider,
        method,
        &DVector::from_element(1, x),
        params,
        n,
        seed,
        0,
    )?;
    let points: Vec<BiasPoint> = params
        .iter()
        .zip(&moments)
        .map(|(&parameter, m)| {
            let estimate = Estimate::from_moments(m);
            BiasPoint {
                parameter,
                estimate,
                bias: estimate.value - exact,
            }
        })
        .collect();
    if let Some(p) = points
        .iter()
        .find(|p| p.estimate.stderr > p.bias.abs() / 3.0)
    {
        return Err(Error::NoiseFloor {
            param: p.parameter,
            bias: p.bias,
            stderr: p.estimate.stderr,
        });
    }
    let biases: Vec<f64> = points.iter().map(|p| p.bias.abs()).collect();
    let fit = fit_loglog(params, &biases)?;
    Ok(BiasCurve {
        method,
        x,
        exact,
        points,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceScaling {
    pub epsilons: Vec<f64>,
    /// Empirical variance of the randomized-kernel summand at `x`.
    pub variances: Vec<f64>,
    /// `ε^{d/2} · variance`
    pub scaled: Vec<f64>,
    pub fit: SlopeFit,
}

/// Variance of `g(x − X − εA[X], εΓ[X])` against `ε`; the slope approaches `−d/2`.
pub fn variance_scaling<P: StructureProvider + ?Sized>(
    provider: &P,
    x: &DVector<f64>,
    epsilons: &[f64],
    n: usize,
    seed: u64,
) -> Result<VarianceScaling> {
    let d = provider.dimension();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if epsilons.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            got: epsilons.len(),
        });
    }
    let moments = kernel_moments(
        provider,
        KernelMethod::RandomKernel,
        x,
        epsilons,
        n,
        seed,
        0,
    )?;
    let variances: Vec<f64> = moments.iter().map(Moments::variance).collect();
    let scaled = epsilons
        .iter()
        .zip(&variances)
        .map(|(e, v)| e.powf(d as f64 / 2.0) * v)
        .collect();
    let fit = fit_loglog(epsilons, &variances)?;
    Ok(VarianceScaling {
        epsilons: epsilons.to_vec(),
        variances,
        scaled,
        fit,
    })
}

/// Settings of a rate experiment on a scalar model.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSpec {
    pub methods: Vec<Method>,
    /// Strictly increasing sample sizes; at least four.
    pub ns: Vec<usize>,
    pub criterion: Criterion,
    /// `(min, max, count)`
    pub grid: (f64, f64, usize),
    /// Independent repetitions per sample size.
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    /// ε for the randomized kernel and the direct formula, `h` for the classical kernel.
    pub parameter: f64,
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub method: Method,
    pub criterion: Criterion,
    pub rows: Vec<RateRow>,
    /// Slope of `log error` against `log N`.
    pub fit: SlopeFit,
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let k = grid.len();
    let mut w = vec![0.0; k];
    for i in 0..k.saturating_sub(1) {
        let h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

fn method_parameter(method: Method, n: usize, criterion: Criterion) -> Result<f64> {
    match method {
        Method::RandomKernel => epsilon_rule(n, 1, criterion),
        Method::Classical => classical_bandwidth(n, 1, criterion),
        Method::Direct => Ok(0.0),
    }
}

/// Measure the error of each method over a range of `N` and fit its rate.
///
/// * [`Criterion::L2`]: root of the replicate-averaged `(1/|I|)∫_I (f̂ − f)²`
///   on the grid interval `I`, integrated by the trapezoid rule.
/// * [`Criterion::Poly`]: grid average of `|E f̂² − f²| + |E f̂ − f|`, with
///   `E f̂` from the oracle and `E f̂² = E[f̂]² + Var(g)/N` using the sample
///   variance of the kernel summand `g`. Needs an oracle; the direct formula
///   is not supported.
///
/// Cell `(i, r)` (sample size index, replicate) draws from stream family
/// `i·2²⁰ + r`; all methods of one cell share their samples.
pub fn rate_experiment<P: StructureProvider + ?Sized>(
    provider: &P,
    spec: &RateSpec,
    oracle: Option<&dyn KernelMeanOracle>,
) -> Result<Vec<RateReport>> {
    require_scalar(provider)?;
    if spec.ns.len() < 4 {
        return Err(Error::TooFewPoints {
            required: 4,
            got: spec.ns.len(),
        });
    }
    if spec.ns.windows(2).any(|w| w[0] >= w[1]) || spec.ns[0] < 2 {
        return Err(invalid(
            "ns",
            "sample sizes must be ≥ 2 and strictly increasing",
        ));
    }
    if spec.methods.is_empty() {
        return Err(invalid("methods", "at least one method is required"));
    }
    if spec.replicates == 0 || spec.replicates >= 1 << 20 {
        return Err(invalid("replicates", "must be in 1..2^20"));
    }
    let (lo, hi, count) = spec.grid;
    if !(lo < hi) || count < 2 {
        return Err(invalid("grid", "need min < max and at least 2 points"));
    }
    let grid: Vec<f64> = grid_1d(lo, hi, count).iter().map(|v| v[0]).collect();
    let exact: Vec<f64> = grid
        .iter()
        .map(|&x| provider.exact_density(x))
        .collect::<Option<_>>()
        .ok_or(Error::NoExactDensity("rate_experiment"))?;
    if spec.criterion == Criterion::Poly {
        if oracle.is_none() {
            return Err(Error::NoExactDensity(
                "polynomial criterion needs a kernel-mean oracle",
            ));
        }
        if spec.methods.contains(&Method::Direct) {
            return Err(Error::Unsupported(
                "direct formula under the polynomial criterion",
            ));
        }
    }
    let weights = trapezoid_weights(&grid);
    let needs_extended = spec.methods.contains(&Method::Direct);

    let mut per_method: Vec<Vec<RateRow>> = vec![Vec::new(); spec.methods.len()];
    for (ni, &n) in spec.ns.iter().enumerate() {
        let params = spec
            .methods
            .iter()
            .map(|&m| method_parameter(m, n, spec.criterion))
            .collect::<Result<Vec<_>>>()?;
        let mut acc = vec![Moments::new(); spec.methods.len()];
        for r in 0..spec.replicates {
            let family = ((ni as u64) << 20) | r as u64;
            let (triplets, extended) = if needs_extended {
                let ext = sample_extended(provider, spec.seed, family, n, None)?;
                (ext.iter().map(|e| e.base.clone()).collect(), ext)
            } else {
                (sample_triplets(provider, spec.seed, family, n)?, Vec::new())
            };
            for (k, &method) in spec.methods.iter().enumerate() {
                let err = match spec.criterion {
                    Criterion::L2 => {
                        let values = l2_values(method, params[k], &triplets, &extended, &grid)?;
                        let ise: f64 = values
                            .iter()
                            .zip(&exact)
                            .zip(&weights)
                            .map(|((v, f), w)| w * (v - f).powi(2))
                            .sum();
                        ise / (hi - lo)
                    }
                    Criterion::Poly => {
                        let o = oracle.expect("checked above");
                        poly_error(method, params[k], &triplets, &grid, &exact, o)?
                    }
                };
                acc[k].push(err);
            }
        }
        for (k, m) in acc.iter().enumerate() {
            let (error, stderr) = match spec.criterion {
                Criterion::L2 => {
                    let root = m.mean().sqrt();
                    (root, m.std_error() / (2.0 * root))
                }
                Criterion::Poly => (m.mean(), m.std_error()),
            };
            per_method[k].push(RateRow {
                n,
                parameter: params[k],
                error,
                stderr,
            });
        }
    }

    spec.methods
        .iter()
        .zip(per_method)
        .map(|(&method, rows)| {
            let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let errs: Vec<f64> = rows.iter().map(|r| r.error).collect();
            Ok(RateReport {
                method,
                criterion: spec.criterion,
                fit: fit_loglog(&ns, &errs)?,
                rows,
            })
        })
        .collect()
}

fn l2_values(
    method: Method,
    param: f64,
    triplets: &[TripletSample],
    extended: &[ExtendedSample],
    grid: &[f64],
) -> Result<Vec<f64>> {
    let vgrid: Vec<DVector<f64>> = grid.iter().map(|&x| DVector::from_element(1, x)).collect();
    Ok(match method {
        Method::RandomKernel => {
            let cfg = EstimatorConfig::new(triplets.len(), EpsilonChoice::Manual(param), vgrid)?;
            random_kernel_density(triplets, &cfg)?.values
        }
        Method::Classical => {
            let points: Vec<DVector<f64>> = triplets.iter().map(|s| s.x.clone()).collect();
            classical_kde(&points, param, &vgrid)?.values
        }
        Method::Direct => direct_density_grid(extended, grid, param)?.values,
    })
}

fn poly_error(
    method: Method,
    param: f64,
    triplets: &[TripletSample],
    grid: &[f64],
    exact: &[f64],
    oracle: &dyn KernelMeanOracle,
) -> Result<f64> {
    let kernel = match method {
        Method::RandomKernel => KernelMethod::RandomKernel,
        Method::Classical => KernelMethod::Classical,
        Method::Direct => {
            return Err(Error::Unsupported(
                "direct formula under the polynomial criterion",
            ))
        }
    };
    let n = triplets.len() as f64;
    let mut total = 0.0;
    for (&x, &f) in grid.iter().zip(exact) {
        let xv = DVector::from_element(1, x);
        let values: Vec<f64> = triplets
            .par_iter()
            .map(|s| kernel.value(param, DEFAULT_RIDGE, s, &xv))
            .collect::<Result<_>>()?;
        let var = values.iter().copied().collect::<Moments>().variance();
        let mean = match kernel {
            KernelMethod::RandomKernel => oracle.random_kernel_mean(param, DEFAULT_RIDGE, x)?,
            KernelMethod::Classical => oracle.classical_mean(param, x)?,
        };
        total += (var / n + mean * mean - f * f).abs() + (mean - f).abs();
    }
    Ok(total / grid.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneViolation {
    pub x: f64,
    pub eps_from: f64,
    pub eps_to: f64,
    /// Mean of the paired change `F_{eps_to} − F_{eps_from}`; negative here.
    pub change: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    pub xs: Vec<f64>,
    /// The ε ladder in decreasing order.
    pub ladder: Vec<f64>,
    /// `values[i][j]`: direct estimate at `xs[i]`, `ladder[j]`.
    pub values: Vec<Vec<Estimate>>,
    pub violations: Vec<MonotoneViolation>,
    pub passed: bool,
}

/// Check that the direct estimate does not decrease as ε decreases, using
/// paired per-sample differences on one fixed sample set: a step fails when
/// its mean change is below −2 standard errors.
pub fn monotone_feps_check(
    samples: &[ExtendedSample],
    xs: &[f64],
    ladder: &[f64],
) -> Result<MonotoneReport> {
    let mut ladder = ladder.to_vec();
    ladder.sort_by(|a, b| b.total_cmp(a));
    ladder.dedup();
    let mut values = Vec::with_capacity(xs.len());
    let mut violations = Vec::new();
    for &x in xs {
        let terms = ladder
            .iter()
            .map(|&e| direct_terms(samples, x, e))
            .collect::<Result<Vec<_>>>()?;
        values.push(
            terms
                .iter()
                .map(|t| Estimate::from_moments(&t.iter().copied().collect()))
                .collect(),
        );
        for j in 1..ladder.len() {
            let diff: Moments = terms[j]
                .iter()
                .zip(&terms[j - 1])
                .map(|(lo, hi)| lo - hi)
                .collect();
            let change = Estimate::from_moments(&diff);
            if change.value < -2.0 * change.stderr {
                violations.push(MonotoneViolation {
                    x,
                    eps_from: ladder[j - 1],
                    eps_to: ladder[j],
                    change: change.value,
                    stderr: change.stderr,
                });
            }
        }
    }
    Ok(MonotoneReport {
        xs: xs.to_vec(),
        ladder,
        values,
        passed: violations.is_empty(),
        violations,
    })
}
