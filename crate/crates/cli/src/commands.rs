//! The five subcommands. Each turns a validated configuration into a table.

use dirichlet_mc::analysis::{
    ibp_residual, monotone_feps_check, rate_experiment, KernelMeanOracle, RateSpec, TestFunction,
};
use dirichlet_mc::estimators::{
    classical_bandwidth, classical_kde, control_zero_mean, direct_density_grid,
    estimate_optimal_epsilon, grid_1d, random_kernel_density, shifted_mean,
};
use dirichlet_mc::{
    sample_extended, sample_triplets, validate_triplet, Criterion, DensityEstimate, EpsilonChoice,
    Error, EstimatorConfig, Method, Payload, DEFAULT_RIDGE,
};

use crate::config::{invalid, parse_criterion, ExperimentConfig, Failure, Model, ParamRule};
use crate::output::Table;

const SAMPLE_FAMILY: u64 = 0;
const IBP_FAMILY: u64 = 1;
const EXTENDED_FAMILY: u64 = 2;
const VALIDATION_FAMILY: u64 = 3;

const DEFAULT_CHECK_N: usize = 20_000;
const MONOTONE_LADDER: [f64; 4] = [0.3, 0.1, 0.03, 0.01];
const MONOTONE_QUANTILES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const PSD_TOL: f64 = 1e-12;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub model: &'a Model,
    pub seed: u64,
}

pub fn parse_method(field: &str, s: &str) -> Result<Method, Failure> {
    match s {
        "random_kernel" => Ok(Method::RandomKernel),
        "classical" => Ok(Method::Classical),
        "direct" => Ok(Method::Direct),
        other => Err(invalid(
            field,
            format!("unknown method {other:?} (expected \"random_kernel\", \"classical\" or \"direct\")"),
        )),
    }
}

fn require_n(field: &str, n: usize) -> Result<usize, Failure> {
    if n < 2 {
        return Err(invalid(field, "need at least 2 samples"));
    }
    Ok(n)
}

fn rule_or_value(field: &str, rule: Option<&ParamRule>) -> Result<Result<Criterion, f64>, Failure> {
    match rule {
        None => Ok(Ok(Criterion::L2)),
        Some(ParamRule::Rule(s)) => parse_criterion(field, s).map(Ok),
        Some(ParamRule::Value(v)) if *v > 0.0 && v.is_finite() => Ok(Err(*v)),
        Some(ParamRule::Value(v)) => Err(invalid(field, format!("must be > 0, got {v}"))),
    }
}

pub fn simulate(ctx: &Context) -> Result<Table, Failure> {
    let count = match (&ctx.cfg.simulate, &ctx.cfg.estimator) {
        (Some(s), _) => s.count,
        (None, Some(e)) => e.n,
        (None, None) => return Err(invalid("simulate.count", "required (or give estimator.n)")),
    };
    if count == 0 {
        return Err(invalid("simulate.count", "must be ≥ 1"));
    }
    let provider = ctx.model.provider();
    let mut t = Table::new(&["index", "x", "gamma", "a", "gamma_gamma", "seed"]);
    if provider.capabilities().extended {
        for (i, s) in sample_extended(provider, ctx.seed, SAMPLE_FAMILY, count, None)?
            .iter()
            .enumerate()
        {
            t.push(vec![
                i.into(),
                s.x().into(),
                s.gamma().into(),
                s.a().into(),
                s.gamma_gamma.into(),
                ctx.seed.into(),
            ]);
        }
    } else {
        for (i, s) in sample_triplets(provider, ctx.seed, SAMPLE_FAMILY, count)?
            .iter()
            .enumerate()
        {
            let (x, g, a) = s.scalar_parts();
            t.push(vec![
                i.into(),
                x.into(),
                g.into(),
                a.into(),
                f64::NAN.into(),
                ctx.seed.into(),
            ]);
        }
    }
    Ok(t)
}

pub fn density(ctx: &Context) -> Result<Table, Failure> {
    let est = ctx
        .cfg
        .estimator
        .as_ref()
        .ok_or_else(|| invalid("estimator", "required for density"))?;
    let n = require_n("estimator.n", est.n)?;
    est.grid.validate("estimator.grid")?;
    let grid = est.grid.points();
    let method = parse_method("estimator.method", &est.method)?;
    let provider = ctx.model.provider();

    let result: DensityEstimate = match method {
        Method::RandomKernel => {
            let epsilon = match rule_or_value("estimator.epsilon", est.epsilon.as_ref())? {
                Ok(c) => EpsilonChoice::Rule(c),
                Err(v) => EpsilonChoice::Manual(v),
            };
            let ridge = est.ridge.unwrap_or(DEFAULT_RIDGE);
            if !(ridge >= 0.0 && ridge.is_finite()) {
                return Err(invalid("estimator.ridge", "must be ≥ 0"));
            }
            let samples = sample_triplets(provider, ctx.seed, SAMPLE_FAMILY, n)?;
            let cfg = EstimatorConfig::new(
                n,
                epsilon,
                grid_1d(est.grid.min, est.grid.max, est.grid.count),
            )?
            .with_ridge(ridge);
            random_kernel_density(&samples, &cfg)?
        }
        Method::Classical => {
            let h = match rule_or_value("estimator.bandwidth", est.bandwidth.as_ref())? {
                Ok(c) => classical_bandwidth(n, 1, c)?,
                Err(v) => v,
            };
            let samples = sample_triplets(provider, ctx.seed, SAMPLE_FAMILY, n)?;
            let points: Vec<_> = samples.into_iter().map(|s| s.x).collect();
            classical_kde(
                &points,
                h,
                &grid_1d(est.grid.min, est.grid.max, est.grid.count),
            )?
        }
        Method::Direct => {
            let eps = match &est.epsilon {
                None => ctx.model.min_epsilon,
                Some(ParamRule::Value(v)) if *v >= 0.0 && v.is_finite() => *v,
                Some(_) => {
                    return Err(invalid(
                        "estimator.epsilon",
                        "the direct method takes a number ε ≥ 0",
                    ))
                }
            };
            if !provider.capabilities().extended {
                return Err(Failure::Validation(
                    Error::Unsupported("extended sampling").to_string(),
                ));
            }
            let samples = sample_extended(provider, ctx.seed, SAMPLE_FAMILY, n, None)?;
            direct_density_grid(&samples, &grid, eps)?
        }
    };

    let mut t = Table::new(&["x", "value", "stderr", "method", "epsilon", "N", "seed"]);
    for (i, &x) in grid.iter().enumerate() {
        t.push(vec![
            x.into(),
            result.values[i].into(),
            result.stderrs[i].into(),
            method.as_str().into(),
            result.parameter.into(),
            n.into(),
            ctx.seed.into(),
        ]);
    }
    if result.skipped > 0 {
        eprintln!(
            "note: {} samples with a singular kernel were skipped",
            result.skipped
        );
    }
    Ok(t)
}

pub fn mean(ctx: &Context) -> Result<Table, Failure> {
    let n = ctx
        .cfg
        .mean
        .as_ref()
        .and_then(|m| m.n)
        .or(ctx.cfg.estimator.as_ref().map(|e| e.n))
        .ok_or_else(|| invalid("mean.n", "required (or give estimator.n)"))?;
    let n = require_n("mean.n", n)?;
    let eps_list = ctx
        .cfg
        .mean
        .as_ref()
        .map(|m| m.epsilons.clone())
        .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0]);
    if let Some(e) = eps_list.iter().find(|e| !e.is_finite()) {
        return Err(invalid("mean.epsilons", format!("must be finite, got {e}")));
    }
    let samples = sample_triplets(ctx.model.provider(), ctx.seed, SAMPLE_FAMILY, n)?;
    let optimal = match estimate_optimal_epsilon(&samples) {
        Ok(o) => Some(o),
        Err(Error::NoReduction) => {
            eprintln!("note: A[X] vanishes on every sample; no optimal shift");
            None
        }
        Err(e) => return Err(e.into()),
    };

    let mut t = Table::new(&[
        "epsilon",
        "mean",
        "stderr",
        "trace_cov",
        "trace_cov_stderr",
        "predicted_trace",
        "method",
        "N",
        "seed",
    ]);
    let mut row = |eps: f64, label: &str| -> Result<(), Failure> {
        let m = shifted_mean(&samples, eps)?;
        let predicted = optimal
            .as_ref()
            .map_or(f64::NAN, |o| o.predicted_trace_at(eps));
        t.push(vec![
            eps.into(),
            m.mean[0].into(),
            m.mean_stderr[0].into(),
            m.trace_cov.into(),
            m.trace_cov_stderr.into(),
            predicted.into(),
            label.into(),
            n.into(),
            ctx.seed.into(),
        ]);
        Ok(())
    };
    for &eps in &eps_list {
        row(eps, "shifted")?;
    }
    if let Some(o) = &optimal {
        row(o.epsilon, "optimal")?;
    }
    Ok(t)
}

pub fn rates(ctx: &Context) -> Result<Table, Failure> {
    let r = ctx
        .cfg
        .rates
        .as_ref()
        .ok_or_else(|| invalid("rates", "required for rates"))?;
    r.grid.validate("rates.grid")?;
    if r.grid.count < 2 {
        return Err(invalid("rates.grid.count", "must be ≥ 2"));
    }
    if r.replicates == 0 {
        return Err(invalid("rates.replicates", "must be ≥ 1"));
    }
    if r.methods.is_empty() {
        return Err(invalid("rates.methods", "must not be empty"));
    }
    let methods = r
        .methods
        .iter()
        .map(|m| parse_method("rates.methods", m))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = RateSpec {
        methods,
        ns: r.ns.clone(),
        criterion: parse_criterion("rates.criterion", &r.criterion)?,
        grid: (r.grid.min, r.grid.max, r.grid.count),
        replicates: r.replicates,
        seed: ctx.seed,
    };
    let oracle = ctx
        .model
        .oracle
        .as_ref()
        .map(|o| o as &dyn KernelMeanOracle);
    let reports = rate_experiment(ctx.model.provider(), &spec, oracle)?;

    let mut t = Table::new(&[
        "N",
        "error",
        "stderr",
        "slope_lo",
        "slope_hi",
        "slope",
        "method",
        "parameter",
        "criterion",
        "seed",
    ]);
    let criterion = match spec.criterion {
        Criterion::L2 => "l2",
        Criterion::Poly => "poly",
    };
    for rep in &reports {
        for row in &rep.rows {
            t.push(vec![
                row.n.into(),
                row.error.into(),
                row.stderr.into(),
                rep.fit.ci_lo.into(),
                rep.fit.ci_hi.into(),
                rep.fit.slope.into(),
                rep.method.as_str().into(),
                row.parameter.into(),
                criterion.into(),
                ctx.seed.into(),
            ]);
        }
    }
    Ok(t)
}

/// Result of `check`: the table and whether every invariant held.
pub struct CheckOutcome {
    pub table: Table,
    pub passed: bool,
}

pub fn check(ctx: &Context) -> Result<CheckOutcome, Failure> {
    let n = ctx
        .cfg
        .check
        .as_ref()
        .map(|c| c.n)
        .or(ctx.cfg.estimator.as_ref().map(|e| e.n))
        .unwrap_or(DEFAULT_CHECK_N);
    let n = require_n("check.n", n)?;
    let provider = ctx.model.provider();
    let mut t = Table::new(&["check", "target", "value", "stderr", "passed", "N", "seed"]);
    let mut all = true;
    let mut push =
        |t: &mut Table, check: &str, target: String, value: f64, stderr: f64, ok: bool| {
            all &= ok;
            t.push(vec![
                check.into(),
                target.into(),
                value.into(),
                stderr.into(),
                ok.into(),
                n.into(),
                ctx.seed.into(),
            ]);
        };

    let st = ctx.model.selftest(ctx.seed)?;
    let target = if st.probes == 0 {
        "built-in".to_string()
    } else {
        format!("{} probes", st.probes)
    };
    push(
        &mut t,
        "derivative_selftest",
        target,
        st.max_rel_error,
        0.0,
        st.passed,
    );

    let triplets = sample_triplets(provider, ctx.seed, VALIDATION_FAMILY, n)?;
    let (mut bad, mut worst) = (0usize, f64::INFINITY);
    for s in &triplets {
        let r = validate_triplet(s, PSD_TOL);
        if !r.passed {
            bad += 1;
        }
        worst = worst.min(r.min_eigenvalue);
    }
    push(
        &mut t,
        "psd",
        "min eigenvalue of Γ".into(),
        worst,
        0.0,
        bad == 0,
    );

    let phis = TestFunction::standard();
    let residuals = ibp_residual(provider, &phis, n, ctx.seed, IBP_FAMILY)?;
    for (phi, r) in phis.iter().zip(&residuals) {
        push(
            &mut t,
            "ibp",
            phi.name.to_string(),
            r.value,
            r.stderr,
            r.value.abs() <= 3.0 * r.stderr,
        );
    }

    if provider.capabilities().extended {
        let eps = ctx.model.min_epsilon;
        let ext = sample_extended(provider, ctx.seed, EXTENDED_FAMILY, n, None)?;
        for payload in [Payload::one(), Payload::cosine()] {
            let with: Vec<_> = ext
                .iter()
                .map(|s| s.clone().with_payload(&payload))
                .collect();
            let z = control_zero_mean(&with, eps)?;
            push(
                &mut t,
                "zero_mean",
                format!("G = {} at eps = {eps}", payload.name),
                z.value,
                z.stderr,
                z.value.abs() <= 3.0 * z.stderr,
            );
        }

        let mut xs: Vec<f64> = ext.iter().map(|s| s.x()).collect();
        xs.sort_by(f64::total_cmp);
        let probes: Vec<f64> = MONOTONE_QUANTILES
            .iter()
            .map(|q| xs[((q * (xs.len() - 1) as f64).round()) as usize])
            .collect();
        let rep = monotone_feps_check(&ext, &probes, &MONOTONE_LADDER)?;
        for (i, &x) in rep.xs.iter().enumerate() {
            let last = rep.values[i].last().copied().expect("non-empty ladder");
            let ok = !rep.violations.iter().any(|v| v.x == x);
            push(
                &mut t,
                "monotone",
                format!("x = {x}"),
                last.value,
                last.stderr,
                ok,
            );
        }
    } else {
        eprintln!("note: model has no extended sampler; zero-mean and monotonicity checks skipped");
    }

    Ok(CheckOutcome {
        table: t,
        passed: all,
    })
}
