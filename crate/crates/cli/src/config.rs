//! Experiment configuration (JSON) and model construction.

use std::fmt;
use std::path::Path;

use dirichlet_mc::analysis::ConstSigmaOracle;
use dirichlet_mc::mcspace::{functional_selftest, McFunctional, McSpaceProvider};
use dirichlet_mc::poisson::{make_interval_model, Intensity, PoissonProvider, Smooth};
use dirichlet_mc::presets::{self, Preset};
use dirichlet_mc::wiener::{
    derivative_selftest, Coefficient, ErrorSource, EulerConfig, SdeModel, WienerProvider,
};
use dirichlet_mc::{derive_substream, Criterion, SelfTestReport, StructureProvider};
use serde::Deserialize;
use serde_json::{Map, Value};

/// A failure classified for the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or unsupported request (exit 2).
    Validation(String),
    /// The computation itself failed (exit 3).
    Numerical(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "invalid configuration: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<dirichlet_mc::Error> for Failure {
    fn from(e: dirichlet_mc::Error) -> Self {
        use dirichlet_mc::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::Unsupported(_)
            | E::DimensionMismatch { .. }
            | E::TooFewPoints { .. }
            | E::NoExactDensity(_)
            | E::MissingPayload { .. }
            | E::EmptySamples => Failure::Validation(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

pub fn invalid(field: &str, msg: impl fmt::Display) -> Failure {
    Failure::Validation(format!("{field}: {msg}"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Map<String, Value>,
    pub estimator: Option<EstimatorSection>,
    pub mean: Option<MeanSection>,
    pub rates: Option<RatesSection>,
    pub simulate: Option<SimulateSection>,
    pub check: Option<CheckSection>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn validate(&self, field: &str) -> Result<(), Failure> {
        if self.count == 0 {
            return Err(invalid(&format!("{field}.count"), "must be ≥ 1"));
        }
        if !(self.min.is_finite() && self.max.is_finite())
            || (self.count > 1 && self.min >= self.max)
        {
            return Err(invalid(field, "need finite min < max"));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        dirichlet_mc::estimators::grid_1d(self.min, self.max, self.count)
            .iter()
            .map(|v| v[0])
            .collect()
    }
}

/// `"l2"`, `"poly"` or an explicit value.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ParamRule {
    Value(f64),
    Rule(String),
}

pub fn parse_criterion(field: &str, s: &str) -> Result<Criterion, Failure> {
    match s {
        "l2" | "L2" => Ok(Criterion::L2),
        "poly" => Ok(Criterion::Poly),
        other => Err(invalid(
            field,
            format!("unknown criterion {other:?} (expected \"l2\" or \"poly\")"),
        )),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    #[serde(default = "default_method")]
    pub method: String,
    pub n: usize,
    pub epsilon: Option<ParamRule>,
    pub bandwidth: Option<ParamRule>,
    pub grid: GridSpec,
    pub ridge: Option<f64>,
}

fn default_method() -> String {
    "random_kernel".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSection {
    pub n: Option<usize>,
    #[serde(default = "default_mean_eps")]
    pub epsilons: Vec<f64>,
}

fn default_mean_eps() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub methods: Vec<String>,
    pub ns: Vec<usize>,
    #[serde(default = "default_criterion")]
    pub criterion: String,
    pub grid: GridSpec,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_criterion() -> String {
    "l2".into()
}

fn default_replicates() -> usize {
    8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("config: {e}")))
}

/// Polynomial `Σ c_k x^k` with exact first and second derivatives.
fn poly_eval(c: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &ck in c.iter().rev() {
        d2 = d2 * x + 2.0 * d1;
        d1 = d1 * x + v;
        v = v * x + ck;
    }
    (v, d1, d2)
}

fn poly_coefficient(c: Vec<f64>) -> Coefficient {
    let (a, b, e) = (c.clone(), c.clone(), c);
    Coefficient::new(
        move |x, _| poly_eval(&a, x).0,
        move |x, _| poly_eval(&b, x).1,
        move |x, _| poly_eval(&e, x).2,
    )
}

fn poly_smooth(c: Vec<f64>) -> Smooth {
    let (a, b, e) = (c.clone(), c.clone(), c);
    Smooth::new(
        move |x| poly_eval(&a, x).0,
        move |x| poly_eval(&b, x).1,
        move |x| poly_eval(&e, x).2,
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WienerParams {
    x0: f64,
    #[serde(default = "one")]
    horizon: f64,
    /// Polynomial coefficients of σ in x, lowest degree first.
    sigma: Vec<f64>,
    #[serde(default)]
    drift: Vec<f64>,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default = "default_source")]
    error_source: String,
    #[serde(default)]
    initial_variance: f64,
}

fn one() -> f64 {
    1.0
}

fn default_steps() -> usize {
    64
}

fn default_source() -> String {
    "brownian".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonParams {
    #[serde(default = "unit_interval")]
    interval: [f64; 2],
    rate: f64,
    /// Polynomial `c` of the base structure `γ[v] = c·v′²`.
    weight: Vec<f64>,
    /// Polynomial `h` in `X = Σ h(p_i)`.
    h: Vec<f64>,
}

fn unit_interval() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McParams {
    functional: String,
    m: Option<usize>,
}

pub enum Built {
    Wiener(WienerProvider),
    Poisson(PoissonProvider, SelfTestReport),
    Mc(McSpaceProvider),
}

pub struct Model {
    pub name: String,
    pub built: Built,
    pub oracle: Option<ConstSigmaOracle>,
    /// Smallest ε for the sign formulas on this model.
    pub min_epsilon: f64,
}

impl Model {
    pub fn provider(&self) -> &dyn StructureProvider {
        match &self.built {
            Built::Wiener(p) => p,
            Built::Poisson(p, _) => p,
            Built::Mc(p) => p,
        }
    }

    pub fn selftest(&self, seed: u64) -> Result<SelfTestReport, Failure> {
        let mut rng = derive_substream(seed, u64::MAX, 0);
        Ok(match &self.built {
            Built::Wiener(p) => derivative_selftest(&p.model, 16, &mut rng)?,
            Built::Poisson(_, r) => r.clone(),
            Built::Mc(p) => functional_selftest(&p.model, 16, &mut rng)?,
        })
    }
}

fn params<T: for<'de> Deserialize<'de>>(
    kind: &str,
    rest: Map<String, Value>,
) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(rest)).map_err(|e| invalid(&format!("model ({kind})"), e))
}

pub fn build_model(section: &Map<String, Value>) -> Result<Model, Failure> {
    let mut rest = section.clone();
    let preset = rest.remove("preset");
    let kind = rest.remove("kind");
    match (preset, kind) {
        (Some(_), Some(_)) => Err(invalid(
            "model",
            "give exactly one of \"preset\" and \"kind\"",
        )),
        (None, None) => Err(invalid("model", "missing \"preset\" or \"kind\"")),
        (Some(p), None) => {
            if let Some(k) = rest.keys().next() {
                return Err(invalid(&format!("model.{k}"), "presets take no parameters"));
            }
            let name = p
                .as_str()
                .ok_or_else(|| invalid("model.preset", "must be a string"))?;
            let preset: Preset = name
                .parse()
                .map_err(|_| invalid("model.preset", format!("unknown preset {name:?}")))?;
            Ok(preset_model(preset))
        }
        (None, Some(k)) => {
            let kind = k
                .as_str()
                .ok_or_else(|| invalid("model.kind", "must be a string"))?;
            match kind {
                "wiener" => wiener_model(params(kind, rest)?),
                "poisson" => poisson_model(params(kind, rest)?),
                "mcspace" => mc_model(params(kind, rest)?),
                other => Err(invalid(
                    "model.kind",
                    format!("unknown model kind {other:?}"),
                )),
            }
        }
    }
}

fn preset_model(p: Preset) -> Model {
    let built = match p {
        Preset::GaussConstSigma => Built::Wiener(presets::gauss_const_sigma()),
        Preset::Gbm => Built::Wiener(presets::gbm()),
        Preset::PoissonInterval => Built::Poisson(
            presets::poisson_interval(),
            SelfTestReport {
                probes: 0,
                max_rel_error: 0.0,
                worst: None,
                passed: true,
            },
        ),
        Preset::McIdentity => Built::Mc(presets::mc_identity()),
    };
    Model {
        name: p.name().into(),
        built,
        oracle: (p == Preset::GaussConstSigma).then(presets::gauss_oracle),
        min_epsilon: p.min_epsilon(),
    }
}

fn wiener_model(w: WienerParams) -> Result<Model, Failure> {
    if w.sigma.is_empty() {
        return Err(invalid("model.sigma", "needs at least one coefficient"));
    }
    let source = match w.error_source.as_str() {
        "brownian" => ErrorSource::Brownian,
        "initial" => ErrorSource::Initial {
            variance: w.initial_variance,
        },
        "both" => ErrorSource::Both {
            variance: w.initial_variance,
        },
        other => {
            return Err(invalid(
                "model.error_source",
                format!("unknown error source {other:?}"),
            ))
        }
    };
    let constant =
        w.sigma.iter().skip(1).all(|&c| c == 0.0) && w.drift.iter().skip(1).all(|&c| c == 0.0);
    let (s0, r0) = (w.sigma[0], w.drift.first().copied().unwrap_or(0.0));
    let model = SdeModel::new(
        w.x0,
        w.horizon,
        poly_coefficient(w.sigma),
        poly_coefficient(w.drift),
        source,
    )?;
    let cfg = EulerConfig::new(w.steps)?;
    let mut provider = WienerProvider::new(model, cfg);
    let mut oracle = None;
    if constant && source == ErrorSource::Brownian && s0 != 0.0 {
        let o = ConstSigmaOracle::new(w.x0, r0, s0, w.horizon)?;
        provider = provider.with_exact_density(move |x| {
            use dirichlet_mc::analysis::KernelMeanOracle;
            o.density(x)
        });
        oracle = Some(o);
    }
    Ok(Model {
        name: "wiener".into(),
        built: Built::Wiener(provider),
        oracle,
        min_epsilon: if source.brownian() { 0.0 } else { 0.01 },
    })
}

fn poisson_model(p: PoissonParams) -> Result<Model, Failure> {
    let (model, report) = make_interval_model(
        poly_smooth(p.weight),
        (p.interval[0], p.interval[1]),
        Intensity::Uniform { rate: p.rate },
        poly_smooth(p.h),
    )?;
    Ok(Model {
        name: "poisson".into(),
        built: Built::Poisson(PoissonProvider::new(model), report),
        oracle: None,
        min_epsilon: 0.01,
    })
}

fn mc_model(p: McParams) -> Result<Model, Failure> {
    let functional = match p.functional.as_str() {
        "identity" => McFunctional::identity(),
        "square" => McFunctional::square(),
        "sum" => McFunctional::sum(p.m.ok_or_else(|| invalid("model.m", "required for \"sum\""))?),
        other => {
            return Err(invalid(
                "model.functional",
                format!("unknown functional {other:?}"),
            ))
        }
    };
    if functional.m == 0 {
        return Err(invalid("model.m", "must be ≥ 1"));
    }
    Ok(Model {
        name: "mcspace".into(),
        built: Built::Mc(McSpaceProvider::new(functional)),
        oracle: None,
        min_epsilon: 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let (v, d1, d2) = poly_eval(&c, 1.5);
        assert!((v - (1.0 - 3.0 + 0.5 * 2.25 + 3.0 * 3.375)).abs() < 1e-12);
        assert!((d1 - (-2.0 + 1.5 + 9.0 * 2.25)).abs() < 1e-12);
        assert!((d2 - (1.0 + 18.0 * 1.5)).abs() < 1e-12);
        assert_eq!(poly_eval(&[], 2.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn model_section_rules() {
        let m = |s: &str| build_model(&serde_json::from_str(s).unwrap());
        assert!(m(r#"{"preset": "gbm"}"#).is_ok());
        assert!(matches!(
            m(r#"{"preset": "nope"}"#),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            m(r#"{"preset": "gbm", "kind": "wiener"}"#),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            m(r#"{"kind": "levy"}"#),
            Err(Failure::Validation(_))
        ));
        assert!(matches!(
            m(r#"{"kind": "wiener", "x0": 0, "sigma": [1], "typo": 1}"#),
            Err(Failure::Validation(_))
        ));
        let w =
            m(r#"{"kind": "wiener", "x0": 0.5, "sigma": [2], "drift": [1], "steps": 4}"#).unwrap();
        assert!(w.oracle.is_some());
        assert!(w.provider().exact_density(1.5).is_some());
        let p =
            m(r#"{"kind": "poisson", "rate": 3, "weight": [0, 1, -1], "h": [0, 0, 1]}"#).unwrap();
        assert!(p.selftest(0).unwrap().passed);
        assert!(m(r#"{"kind": "mcspace", "functional": "sum", "m": 3}"#).is_ok());
        assert!(matches!(
            m(r#"{"kind": "mcspace", "functional": "sum"}"#),
            Err(Failure::Validation(_))
        ));
    }
}
