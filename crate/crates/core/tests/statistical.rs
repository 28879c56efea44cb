//! Statistical identities across providers and estimators, checked against
//! closed forms or quadrature at 3 standard errors.

use std::f64::consts::PI;

use dirichlet_mc::analysis::{
    bias_curve, fit_loglog, ibp_residual, monotone_feps_check, quadrature_oracle, rate_experiment,
    variance_scaling, KernelMeanOracle, KernelMethod, RateSpec, TestFunction,
};
use dirichlet_mc::estimators::{
    control_zero_mean, direct_conditional, direct_density, estimate_optimal_epsilon, grid_1d,
    random_kernel_density, shifted_mean, Control, EpsilonChoice, EstimatorConfig,
};
use dirichlet_mc::mcspace::coordinate_weights;
use dirichlet_mc::presets::{
    gauss_const_sigma, gauss_oracle, mc_identity, poisson_interval, POISSON_RATE,
};
use dirichlet_mc::provider::IndependentCopies;
use dirichlet_mc::{
    sample_extended, sample_triplets, Criterion, Error, Method, Moments, Payload, Preset,
};
use nalgebra::DVector;

const SEED: u64 = 11;
const N: usize = 100_000;

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[test]
fn generator_has_zero_mean_on_every_provider() {
    for (i, p) in Preset::ALL.iter().enumerate() {
        let s = sample_triplets(&*p.provider(), SEED, i as u64, 20_000).unwrap();
        let base = shifted_mean(&s, 0.0).unwrap();
        let a: Moments = s.iter().map(|t| t.a[0]).collect();
        for eps in [0.1, 1.0] {
            let shifted = shifted_mean(&s, eps).unwrap();
            // on shared samples the difference of the two means is ε·mean(A)
            let diff = shifted.mean[0] - base.mean[0];
            assert!((diff - eps * a.mean()).abs() < 1e-12);
            assert!(
                diff.abs() <= 3.0 * eps * a.std_error(),
                "{p}: ε={eps} shift {diff}"
            );
        }
    }
}

#[test]
fn variance_parabola_fits() {
    let s = sample_triplets(&gauss_const_sigma(), SEED, 10, N).unwrap();
    let opt = estimate_optimal_epsilon(&s).unwrap();
    assert!((opt.epsilon - 2.0).abs() < 0.05);
    assert!(opt.predicted_trace.abs() < 0.02);
    let grid = [0.0, 0.5 * opt.epsilon, opt.epsilon, 2.0 * opt.epsilon];
    let emp: Vec<f64> = grid
        .iter()
        .map(|&e| shifted_mean(&s, e).unwrap().trace_cov)
        .collect();
    let pred: Vec<f64> = grid.iter().map(|&e| opt.predicted_trace_at(e)).collect();
    let mean = emp.iter().sum::<f64>() / emp.len() as f64;
    let ss_tot: f64 = emp.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = emp.iter().zip(&pred).map(|(a, b)| (a - b).powi(2)).sum();
    assert!(1.0 - ss_res / ss_tot >= 0.99);
}

#[test]
fn random_kernel_normalizes_and_matches_oracle() {
    let s = sample_triplets(&gauss_const_sigma(), SEED, 11, N).unwrap();
    let cfg = EstimatorConfig::new(
        N,
        EpsilonChoice::Rule(Criterion::L2),
        grid_1d(-8.0, 8.0, 321),
    )
    .unwrap();
    let est = random_kernel_density(&s, &cfg).unwrap();
    let dx = 16.0 / 320.0;
    let mass: f64 = est
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| if i == 0 || i == 320 { 0.5 * v } else { *v })
        .sum::<f64>()
        * dx;
    assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    let mid = 160;
    let oracle = gauss_oracle()
        .random_kernel_mean(est.parameter, cfg.ridge, 0.0)
        .unwrap();
    assert!((est.values[mid] - oracle).abs() <= 3.0 * est.stderrs[mid]);
}

#[test]
fn direct_density_examples() {
    let g = sample_extended(&gauss_const_sigma(), SEED, 12, N, None).unwrap();
    let e = direct_density(&g, 0.0, 0.0).unwrap();
    assert!(e.within(phi(0.0), 3.0), "{e:?}");

    let m = sample_extended(&mc_identity(), SEED, 13, N, None).unwrap();
    let eps = 0.01;
    let integrand = |u: f64| {
        let (w, dw) = coordinate_weights(u).unwrap();
        -dw * w / (eps + w).powi(2) + dw / (eps + w)
    };
    let oracle = 0.5
        * (quadrature_oracle(integrand, 0.0, 0.5, 1e-12).unwrap()
            - quadrature_oracle(integrand, 0.5, 1.0, 1e-12).unwrap());
    // F_ε(x) = w(x)/(ε + w(x)) in closed form
    assert!((oracle - 0.0625 / 0.0725).abs() < 1e-10);
    let e = direct_density(&m, 0.5, eps).unwrap();
    assert!(e.within(oracle, 3.0), "{e:?} vs {oracle}");
}

#[test]
fn regularized_gauss_family_is_scaled_density() {
    let g = sample_extended(&gauss_const_sigma(), SEED, 14, N, None).unwrap();
    for x in [-0.5, 0.0, 1.0] {
        for eps in [0.1, 0.5] {
            let e = direct_density(&g, x, eps).unwrap();
            let z = direct_density(&g, x, 0.0).unwrap();
            // Γ ≡ 1 makes every per-sample term scale by exactly 1/(1+ε)
            assert!((e.value * (1.0 + eps) - z.value).abs() < 1e-12);
            assert!(e.within(phi(x) / (1.0 + eps), 3.0));
        }
    }
    let r = monotone_feps_check(&g, &[-0.5, 0.0, 1.0], &[0.5, 0.1, 0.0]).unwrap();
    assert!(r.passed);
    for row in &r.values {
        assert!(row[0].value < row[1].value && row[1].value < row[2].value);
    }
}

#[test]
fn mc_identity_is_monotone() {
    let m = sample_extended(&mc_identity(), SEED, 15, N, None).unwrap();
    let r = monotone_feps_check(&m, &[0.5], &[0.3, 0.1, 0.03]).unwrap();
    assert!(r.passed, "{:?}", r.violations);
    let one = monotone_feps_check(&m, &[0.5], &[0.1]).unwrap();
    assert!(one.passed && one.violations.is_empty());
}

#[test]
fn conditional_and_controls() {
    let s = sample_extended(&gauss_const_sigma(), SEED, 16, N, Some(&Payload::cosine())).unwrap();
    let zero = direct_conditional(&s, 0.0, 0.0, &Control::Zero).unwrap();
    let sign = direct_conditional(&s, 0.0, 0.0, &Control::EmpiricalSign).unwrap();
    let opt = direct_conditional(&s, 0.0, 0.0, &Control::Optimal).unwrap();
    for e in [zero, sign, opt] {
        assert!(e.estimate.within(phi(0.0), 3.0), "{e:?}");
    }
    assert!(opt.variance <= zero.variance);

    let x = 0.7;
    let fixed = direct_conditional(
        &s,
        x,
        0.0,
        &Control::Fixed(std::sync::Arc::new(|x: f64| x.tanh())),
    )
    .unwrap();
    assert!(fixed.estimate.within(phi(x) * x.cos(), 3.0));
}

#[test]
fn zero_mean_identity_examples() {
    let g = sample_extended(&gauss_const_sigma(), SEED, 17, N, Some(&Payload::one())).unwrap();
    assert!(control_zero_mean(&g, 0.0).unwrap().within(0.0, 3.0));
    let m = sample_extended(&mc_identity(), SEED, 18, N, Some(&Payload::cosine())).unwrap();
    assert!(control_zero_mean(&m, 0.01).unwrap().within(0.0, 3.0));
}

#[test]
fn ibp_examples() {
    let p = gauss_const_sigma();
    let r = ibp_residual(
        &p,
        &[TestFunction::square(), TestFunction::identity()],
        N,
        SEED,
        19,
    )
    .unwrap();
    assert!(r.iter().all(|e| e.within(0.0, 3.0)), "{r:?}");
    for (i, preset) in [Preset::PoissonInterval, Preset::McIdentity, Preset::Gbm]
        .iter()
        .enumerate()
    {
        let r = ibp_residual(
            &*preset.provider(),
            &[TestFunction::cos()],
            50_000,
            SEED,
            20 + i as u64,
        )
        .unwrap();
        assert!(r[0].within(0.0, 3.0), "{preset}: {r:?}");
    }
}

#[test]
fn poisson_campbell_moments() {
    // E[X] = λ∫x² = λ/3, E[Γ] = λ∫x(1−x)(2x)² = λ/5, E[A] = 0
    let s = sample_extended(&poisson_interval(), SEED, 21, N, None).unwrap();
    let x: Moments = s.iter().map(|e| e.x()).collect();
    let g: Moments = s.iter().map(|e| e.gamma()).collect();
    let a: Moments = s.iter().map(|e| e.a()).collect();
    assert!((x.mean() - POISSON_RATE / 3.0).abs() <= 3.0 * x.std_error());
    assert!((g.mean() - POISSON_RATE / 5.0).abs() <= 3.0 * g.std_error());
    assert!(a.mean().abs() <= 3.0 * a.std_error());
    let empty = s.iter().filter(|e| e.is_degenerate()).count() as f64 / N as f64;
    let p0 = (-POISSON_RATE).exp();
    assert!((empty - p0).abs() <= 3.0 * (p0 * (1.0 - p0) / N as f64).sqrt());
    assert!(matches!(
        direct_density(&s, 1.0, 0.0),
        Err(Error::Degenerate)
    ));
}

#[test]
fn bias_curve_guards() {
    let p = gauss_const_sigma();
    assert!(matches!(
        bias_curve(&p, KernelMethod::RandomKernel, 0.0, &[0.5], 1000, SEED),
        Err(Error::TooFewPoints { .. })
    ));
    assert!(matches!(
        bias_curve(
            &p,
            KernelMethod::RandomKernel,
            0.0,
            &[0.01, 0.02],
            1000,
            SEED
        ),
        Err(Error::NoiseFloor { .. })
    ));
    assert!(matches!(
        bias_curve(
            &poisson_interval(),
            KernelMethod::Classical,
            0.0,
            &[0.1, 0.2],
            1000,
            SEED
        ),
        Err(Error::NoExactDensity(_))
    ));
}

#[test]
fn product_model_variance_scales_with_dimension() {
    let toy = IndependentCopies {
        inner: gauss_const_sigma(),
        copies: 2,
    };
    let vs = variance_scaling(
        &toy,
        &DVector::zeros(2),
        &[1e-3, 3e-3, 1e-2, 3e-2],
        1 << 20,
        SEED,
    )
    .unwrap();
    assert!((vs.fit.slope + 1.0).abs() <= 0.15, "slope {}", vs.fit.slope);
    let one = variance_scaling(
        &gauss_const_sigma(),
        &DVector::zeros(1),
        &[1e-3, 1e-2],
        1 << 18,
        SEED,
    )
    .unwrap();
    assert!((one.fit.slope + 0.5).abs() <= 0.1);
}

#[test]
fn rate_experiment_guards() {
    let p = gauss_const_sigma();
    let spec = RateSpec {
        methods: vec![Method::RandomKernel],
        ns: vec![256, 512, 1024],
        criterion: Criterion::L2,
        grid: (-3.0, 3.0, 13),
        replicates: 2,
        seed: SEED,
    };
    assert!(matches!(
        rate_experiment(&p, &spec, None),
        Err(Error::TooFewPoints { .. })
    ));
    let spec = RateSpec {
        ns: vec![256, 512, 1024, 2048],
        criterion: Criterion::Poly,
        ..spec
    };
    assert!(matches!(
        rate_experiment(&p, &spec, None),
        Err(Error::NoExactDensity(_))
    ));
    let direct = RateSpec {
        methods: vec![Method::Direct],
        ..spec.clone()
    };
    assert!(matches!(
        rate_experiment(&p, &direct, Some(&gauss_oracle())),
        Err(Error::Unsupported(_))
    ));
    let reports = rate_experiment(&p, &spec, Some(&gauss_oracle())).unwrap();
    assert_eq!(reports[0].rows.len(), 4);
    assert!(reports[0].rows.windows(2).all(|w| w[0].n < w[1].n));
}

#[test]
fn classical_kde_error_is_of_theoretical_order() {
    // L² error constant of the classical rule at N = 10⁵ against N^{−2/5}
    let p = gauss_const_sigma();
    let spec = RateSpec {
        methods: vec![Method::Classical],
        ns: vec![12_500, 25_000, 50_000, 100_000],
        criterion: Criterion::L2,
        grid: (-4.0, 4.0, 41),
        replicates: 4,
        seed: SEED,
    };
    let r = &rate_experiment(&p, &spec, None).unwrap()[0];
    let last = r.rows.last().unwrap();
    let constant = last.error / (last.n as f64).powf(-0.4);
    let ns: Vec<f64> = r.rows.iter().map(|r| r.n as f64).collect();
    let errs: Vec<f64> = r.rows.iter().map(|r| r.error).collect();
    let fit = fit_loglog(&ns, &errs).unwrap();
    let predicted = fit.intercept.exp();
    assert!(constant <= 3.0 * predicted && constant >= predicted / 3.0);
}
