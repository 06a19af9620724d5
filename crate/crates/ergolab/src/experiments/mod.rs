//! Experiment configuration, the sweep runner and its JSON report.
//!
//! Each experiment yields raw cases whose ratios carry a [`Limit`]: either a
//! fixed tolerance or the name of a calibrated constant.  [`run`] resolves the
//! names against a [`FrozenConstants`] file and decides pass or violation.

pub mod stats;
mod suites;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calibrate::FrozenConstants;
use crate::error::{Error, Result};
use crate::params::{derive_params, Params};
use crate::signals::{
    gen_block_characters, gen_character, gen_rademacher, gen_random_phase, gen_rotation_indicator, load_signal, Signal,
};

pub const ARTIFACT_VERSION: &str = concat!("ergolab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Osc,
    Transference,
    Spectrum,
    Sampling,
    Fejer,
    Poisson,
    EntropyChain,
    Jumps,
    Variation,
    Bessel,
    Forest,
    Branches,
    SingleScale,
    KeyInequality,
    FreqSnap,
}

impl Experiment {
    pub const ALL: [Experiment; 15] = [
        Self::Osc,
        Self::Transference,
        Self::Spectrum,
        Self::Sampling,
        Self::Fejer,
        Self::Poisson,
        Self::EntropyChain,
        Self::Jumps,
        Self::Variation,
        Self::Bessel,
        Self::Forest,
        Self::Branches,
        Self::SingleScale,
        Self::KeyInequality,
        Self::FreqSnap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Osc => "osc",
            Self::Transference => "transference",
            Self::Spectrum => "spectrum",
            Self::Sampling => "sampling",
            Self::Fejer => "fejer",
            Self::Poisson => "poisson",
            Self::EntropyChain => "entropy_chain",
            Self::Jumps => "jumps",
            Self::Variation => "variation",
            Self::Bessel => "bessel",
            Self::Forest => "forest",
            Self::Branches => "branches",
            Self::SingleScale => "single_scale",
            Self::KeyInequality => "key_inequality",
            Self::FreqSnap => "freq_snap",
        }
    }

    /// Whether the default sweep draws random data, and so needs a seed.
    fn draws_random(self) -> bool {
        !matches!(self, Self::Osc)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// The scalar inputs of [`derive_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsSpec {
    pub alpha: f64,
    pub tau: f64,
    pub delta: f64,
    pub a0: f64,
    pub cap: u64,
}

impl Default for ParamsSpec {
    fn default() -> Self {
        Self { alpha: std::f64::consts::SQRT_2, tau: 0.2, delta: 0.125, a0: 10.0, cap: 1 << 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Character { theta: f64, h: usize },
    RotationIndicator { theta0: f64, arc: (f64, f64), h: usize },
    Rademacher { seed: Option<u64>, h: usize },
    RandomPhase { seed: Option<u64>, h: usize },
    BlockCharacters { seed: Option<u64>, h: usize, split: f64, min_block: usize },
    Ones { h: usize },
    File { path: PathBuf },
}

impl SignalSpec {
    fn is_random(&self) -> bool {
        matches!(self, Self::Rademacher { .. } | Self::RandomPhase { .. } | Self::BlockCharacters { .. })
    }

    fn own_seed(&self) -> Option<u64> {
        match self {
            Self::Rademacher { seed, .. } | Self::RandomPhase { seed, .. } | Self::BlockCharacters { seed, .. } => {
                *seed
            }
            _ => None,
        }
    }

    /// Builds the signal; random generators without their own seed use `fallback`.
    pub fn build(&self, fallback: Option<u64>) -> Result<Signal> {
        let need =
            || self.own_seed().or(fallback).ok_or_else(|| Error::Config(format!("random signal {self:?} has no seed")));
        match self {
            Self::Character { theta, h } => gen_character(*theta, *h),
            Self::RotationIndicator { theta0, arc, h } => gen_rotation_indicator(*theta0, *arc, *h),
            Self::Rademacher { h, .. } => gen_rademacher(need()?, *h),
            Self::RandomPhase { h, .. } => gen_random_phase(need()?, *h),
            Self::BlockCharacters { h, split, min_block, .. } => gen_block_characters(need()?, *h, *split, *min_block),
            Self::Ones { h } => Ok(Signal::ones(*h)),
            Self::File { path } => load_signal(path),
        }
    }
}

/// Sweep lists; an absent list takes the experiment's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub delta: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
    pub h: Option<Vec<usize>>,
    pub r: Option<Vec<u64>>,
}

/// Desk-scale knobs that the parameter ladder would otherwise make astronomically small.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tuning {
    pub rho: Option<f64>,
    pub t_small: Option<f64>,
    /// Superlevel threshold `t` for the operator checks.
    pub threshold: Option<f64>,
    pub v: Option<Vec<usize>>,
    pub scale_step: Option<u32>,
    pub u: Option<u64>,
    pub dims: Option<Vec<usize>>,
    pub b: Option<u32>,
    pub eps: Option<f64>,
    pub split: Option<f64>,
    pub selector_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: ParamsSpec,
    #[serde(default)]
    pub signals: Vec<SignalSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub tuning: Tuning,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Ensemble size per sweep point.
    #[serde(default)]
    pub cases: Option<usize>,
    /// Frozen-constant file; defaults to the committed calibration.
    #[serde(default)]
    pub constants: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            params: ParamsSpec::default(),
            signals: vec![],
            sweep: Sweep::default(),
            tuning: Tuning::default(),
            seed: None,
            cases: None,
            constants: None,
            out: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_cases(mut self, cases: usize) -> Self {
        self.cases = Some(cases);
        self
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        for s in &self.signals {
            if let SignalSpec::File { path } = s {
                if !path.is_file() {
                    return cfg(format!("signal file {} does not exist", path.display()));
                }
            }
            if s.is_random() && s.own_seed().is_none() && self.seed.is_none() {
                return cfg(format!("random signal {s:?} needs a seed (set `seed` or pass --seed)"));
            }
        }
        if let Some(p) = &self.constants {
            if !p.is_file() {
                return cfg(format!("constants file {} does not exist", p.display()));
            }
        }
        let sw = &self.sweep;
        let empty = [
            ("delta", sw.delta.as_ref().map(Vec::len)),
            ("tau", sw.tau.as_ref().map(Vec::len)),
            ("h", sw.h.as_ref().map(Vec::len)),
            ("r", sw.r.as_ref().map(Vec::len)),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, n)| *n == Some(0)) {
            return cfg(format!("sweep list `{name}` is empty"));
        }
        if self.cases == Some(0) {
            return cfg("`cases` must be positive".into());
        }
        let deterministic_inputs = !self.signals.is_empty()
            && self.signals.iter().all(|s| !s.is_random() || s.own_seed().is_some())
            && matches!(self.experiment, Experiment::Fejer | Experiment::Spectrum | Experiment::Bessel);
        if self.experiment.draws_random() && !deterministic_inputs && self.seed.is_none() {
            return cfg(format!("experiment `{}` draws random data and needs a seed", self.experiment));
        }
        self.params()?;
        Ok(())
    }

    pub fn params(&self) -> Result<Params> {
        let p = &self.params;
        derive_params(p.alpha, p.tau, p.delta, p.a0, p.cap).map_err(|e| Error::Config(format!("params block: {e}")))
    }
}

/// How a measured value is judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
    /// At most a frozen calibrated constant.
    Calibrated(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: String,
    pub limit: f64,
    /// `fixed` or the calibration id the limit comes from.
    pub provenance: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub label: String,
    pub inputs: BTreeMap<String, Value>,
    pub measured: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub seed_registry: BTreeMap<String, u64>,
    pub cases: Vec<CaseReport>,
    pub summary: Vec<Check>,
    pub checks: usize,
    pub violations: usize,
    pub pass: bool,
}

impl RunReport {
    /// Pretty JSON with a trailing newline; identical inputs give identical bytes.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Largest value among checks with the given name, across cases and summary.
    pub fn max_of(&self, name: &str) -> Option<f64> {
        self.cases
            .iter()
            .flat_map(|c| &c.checks)
            .chain(&self.summary)
            .filter(|c| c.name == name)
            .map(|c| c.value)
            .reduce(f64::max)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.summary.iter().find(|c| c.name == name)
    }
}

/// A case before its limits are resolved.
#[derive(Debug, Clone, Default)]
pub(crate) struct RawCase {
    pub label: String,
    pub inputs: BTreeMap<String, Value>,
    pub measured: BTreeMap<String, Value>,
    pub ratios: Vec<(String, f64, Limit)>,
}

impl RawCase {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ..Self::default() }
    }

    pub fn input(mut self, key: &str, v: impl Serialize) -> Self {
        self.inputs.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn measure(mut self, key: &str, v: impl Serialize) -> Self {
        self.measured.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn ratio(mut self, name: &str, value: f64, limit: Limit) -> Self {
        self.ratios.push((name.into(), value, limit));
        self
    }

    /// Wraps an error with this case's parameter tuple.
    pub fn fail(&self, e: Error) -> Error {
        let tuple = serde_json::to_string(&self.inputs).unwrap_or_default();
        Error::Case { case: format!("{} {tuple}", self.label), source: Box::new(e) }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Outcome {
    pub cases: Vec<RawCase>,
    pub summary: Vec<(String, f64, Limit)>,
    pub seeds: BTreeMap<String, u64>,
}

/// Runtime context handed to each experiment.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub params: Params,
}

impl Ctx<'_> {
    pub fn seed(&self) -> Result<u64> {
        self.cfg.seed.ok_or_else(|| Error::Config(format!("experiment `{}` needs a seed", self.cfg.experiment)))
    }

    pub fn cases(&self, default: usize) -> usize {
        self.cfg.cases.unwrap_or(default)
    }

    pub fn deltas(&self, default: &[f64]) -> Vec<f64> {
        self.cfg.sweep.delta.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn hs(&self, default: &[usize]) -> Vec<usize> {
        self.cfg.sweep.h.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn taus(&self, default: &[f64]) -> Vec<f64> {
        self.cfg.sweep.tau.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn rs(&self, default: &[u64]) -> Vec<u64> {
        self.cfg.sweep.r.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn tuning(&self) -> &Tuning {
        &self.cfg.tuning
    }
}

/// Runs the raw experiment without resolving limits.
pub(crate) fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let ctx = Ctx { cfg, params: cfg.params()? };
    let mut out = suites::dispatch(&ctx)?;
    if let Some(s) = cfg.seed {
        out.seeds.insert("run".into(), s);
    }
    Ok(out)
}

fn resolve(name: &str, value: f64, limit: &Limit, frozen: &FrozenConstants) -> Result<Check> {
    let (relation, bound, provenance) = match limit {
        Limit::AtMost(b) => ("<=", *b, "fixed".to_string()),
        Limit::AtLeast(b) => (">=", *b, "fixed".to_string()),
        Limit::Calibrated(c) => {
            let (b, id) = frozen.lookup(c)?;
            ("<=", b, id.to_string())
        }
    };
    let pass = match relation {
        ">=" => value >= bound,
        _ => value <= bound,
    };
    Ok(Check { name: name.into(), value, relation: relation.into(), limit: bound, provenance, pass })
}

/// Executes the experiment and judges every ratio against its limit.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let frozen = match &cfg.constants {
        Some(p) => FrozenConstants::load(p)?,
        None => FrozenConstants::committed()?,
    };
    run_with(cfg, &frozen)
}

pub fn run_with(cfg: &ExperimentConfig, frozen: &FrozenConstants) -> Result<RunReport> {
    let out = execute(cfg)?;
    let cases = out
        .cases
        .into_iter()
        .map(|c| {
            let checks = c.ratios.iter().map(|(n, v, l)| resolve(n, *v, l, frozen)).collect::<Result<Vec<_>>>()?;
            Ok(CaseReport { label: c.label, inputs: c.inputs, measured: c.measured, checks })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = out.summary.iter().map(|(n, v, l)| resolve(n, *v, l, frozen)).collect::<Result<Vec<_>>>()?;
    let all = cases.iter().flat_map(|c| &c.checks).chain(&summary);
    let checks = all.clone().count();
    let violations = all.filter(|c| !c.pass).count();
    Ok(RunReport {
        artifact_version: ARTIFACT_VERSION.into(),
        experiment: cfg.experiment,
        config: cfg.clone(),
        seed_registry: out.seeds,
        cases,
        summary,
        checks,
        violations,
        pass: violations == 0,
    })
}
