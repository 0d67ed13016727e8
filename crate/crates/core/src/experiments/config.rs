//! Experiment configuration.
//!
//! Files are line-oriented `key = value` pairs grouped under `[section]`
//! headers. Numbers are written plainly, lists as `[0.2, 0.4]`, names in
//! quotes. Unknown sections or keys are rejected.
//!
//! ```text
//! [experiment]
//! kind = "purity-sweep"
//! seed = 7
//!
//! [system]
//! n1 = 512
//! k1 = [5.09]
//! eps = [0.2, 0.4, 0.8]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::torus::{DEFAULT_COUPLING_OFFSET, DEFAULT_P_OFFSET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PuritySweep,
    LyapunovCollapse,
    WignerCompare,
    EnvDecoherence,
    GammaEstimate,
    LyapunovEstimate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PuritySweep => "purity-sweep",
            Self::LyapunovCollapse => "lyapunov-collapse",
            Self::WignerCompare => "wigner-compare",
            Self::EnvDecoherence => "env-decoherence",
            Self::GammaEstimate => "gamma-estimate",
            Self::LyapunovEstimate => "lyapunov-estimate",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Width of the initial packets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaPolicy {
    /// `"coherent"`: `σ = √ħ` on each grid.
    Named(SigmaName),
    /// A fixed width for every grid.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaName {
    Coherent,
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        Self::Named(SigmaName::Coherent)
    }
}

impl SigmaPolicy {
    pub fn sigma(&self, hbar: f64) -> f64 {
        match self {
            Self::Named(SigmaName::Coherent) => hbar.sqrt(),
            Self::Fixed(s) => *s,
        }
    }
}

/// How curves are shifted in time before rescaling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnsetPolicy {
    /// Onset from the force correlator.
    #[default]
    Computed,
    /// Onset from the intercept of each curve's own fit.
    Fitted,
}

// accept `x = 1.0` as well as `x = [1.0, 2.0]`
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub n1: usize,
    pub n2: usize,
    #[serde(deserialize_with = "one_or_many")]
    pub k1: Vec<f64>,
    /// Empty: each cell uses `K₂ = K₁`.
    #[serde(deserialize_with = "one_or_many")]
    pub k2: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub eps: Vec<f64>,
    pub x_offset: f64,
    pub p_offset: f64,
    pub coupling_offset: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            n1: 512,
            n2: 512,
            k1: vec![5.09],
            k2: Vec::new(),
            eps: vec![4.0],
            x_offset: 0.0,
            p_offset: DEFAULT_P_OFFSET,
            coupling_offset: DEFAULT_COUPLING_OFFSET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub n_kicks: usize,
    pub n_initial_states: usize,
    pub sigma: SigmaPolicy,
    pub onset: OnsetPolicy,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            n_kicks: 25,
            n_initial_states: 20,
            sigma: SigmaPolicy::default(),
            onset: OnsetPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub lyapunov_samples: usize,
    pub lyapunov_steps: usize,
    pub correlator_trajectories: usize,
    pub correlator_t_max: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            lyapunov_samples: 1000,
            lyapunov_steps: 1000,
            correlator_trajectories: 100_000,
            correlator_t_max: crate::theory::CORRELATOR_T_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSpaceSection {
    pub k1: f64,
    pub k2: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub eps: Vec<f64>,
    pub sizes: Vec<usize>,
    pub x0: f64,
    pub p0: f64,
    pub n_kicks: usize,
    pub resolution: usize,
    pub ensemble_size: usize,
    pub memory_budget_mb: u64,
}

impl Default for PhaseSpaceSection {
    fn default() -> Self {
        Self {
            k1: 3.09,
            k2: 100.0,
            eps: vec![0.0, 4.0],
            sizes: vec![512, 1024],
            x0: 1.0,
            p0: 2.0,
            n_kicks: 5,
            resolution: 128,
            ensemble_size: 1_000_000,
            memory_budget_mb: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSection {
    pub n1: usize,
    pub n2: usize,
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub n_env_states: usize,
    pub n_kicks: usize,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self {
            n1: 512,
            n2: 512,
            k1: 3.09,
            k2: 100.0,
            eps: 4.0,
            n_env_states: 8,
            n_kicks: 25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub phase_space: PhaseSpaceSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
}

impl ExperimentConfig {
    /// Defaults for everything except the mandatory kind and seed.
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment: ExperimentSection {
                kind,
                seed,
                output_dir: None,
            },
            system: SystemSection::default(),
            run: RunSection::default(),
            classical: ClassicalSection::default(),
            phase_space: PhaseSpaceSection::default(),
            environment: EnvironmentSection::default(),
        }
    }

    /// `(K₁, K₂)` pairs of the sweep.
    pub fn kick_pairs(&self) -> Result<Vec<(f64, f64)>> {
        let s = &self.system;
        match s.k2.len() {
            0 => Ok(s.k1.iter().map(|&k| (k, k)).collect()),
            1 => Ok(s.k1.iter().map(|&k| (k, s.k2[0])).collect()),
            n if n == s.k1.len() => Ok(s.k1.iter().cloned().zip(s.k2.iter().cloned()).collect()),
            n => Err(Error::Config(format!(
                "system.k2 has {n} values; expected none, one, or one per system.k1 value ({})",
                s.k1.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let s = &self.system;
        for (name, n) in [("system.n1", s.n1), ("system.n2", s.n2), ("environment.n1", self.environment.n1), ("environment.n2", self.environment.n2)] {
            if n < 2 || n % 2 != 0 {
                return bad(format!("{name} must be an even number of sites ≥ 2, got {n}"));
            }
        }
        for &n in &self.phase_space.sizes {
            if n < 2 || n % 2 != 0 {
                return bad(format!("phase_space.sizes must hold even sizes ≥ 2, got {n}"));
            }
        }
        if s.k1.is_empty() {
            return bad("system.k1 must list at least one kick strength".into());
        }
        if s.eps.is_empty() || self.phase_space.eps.is_empty() {
            return bad("eps lists must not be empty".into());
        }
        let all_values = s.k1.iter().chain(&s.k2).chain(&s.eps).chain(&self.phase_space.eps);
        for &v in all_values {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("kick strengths and couplings must be finite and nonnegative, got {v}"));
            }
        }
        for (name, v) in [("system.x_offset", s.x_offset), ("system.p_offset", s.p_offset)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        if self.run.n_initial_states == 0 {
            return bad("run.n_initial_states must be at least 1".into());
        }
        if let SigmaPolicy::Fixed(v) = self.run.sigma {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("run.sigma must be positive, got {v}"));
            }
        }
        if self.classical.lyapunov_samples == 0 || self.classical.correlator_trajectories < 2 {
            return bad("classical sample counts are too small".into());
        }
        if self.phase_space.sizes.is_empty() {
            return bad("phase_space.sizes must list at least one size".into());
        }
        if self.phase_space.resolution < crate::observables::MIN_RESOLUTION {
            return bad(format!(
                "phase_space.resolution must be at least {}",
                crate::observables::MIN_RESOLUTION
            ));
        }
        if self.phase_space.ensemble_size == 0 {
            return bad("phase_space.ensemble_size must be at least 1".into());
        }
        if self.environment.n_env_states == 0 {
            return bad("environment.n_env_states must be at least 1".into());
        }
        self.kick_pairs().map(|_| ())
    }

    /// Serialize in the same format [`parse_config_str`] reads.
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("config values are representable")
    }
}

/// Parse and validate a configuration, applying `section.key=value`
/// overrides on top of the file contents.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let cfg: ExperimentConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (path, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{ov}` is not of the form section.key=value")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| Error::Config(format!("override key `{path}` is not of the form section.key")))?;
    let raw = raw.trim();
    // parse the value as it would appear in a file; bare words become strings
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let sec = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match sec {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(Error::Config(format!("`{section}` is not a section"))),
    }
}
