//! Experiment configuration and its validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amp::{Denoiser, DenoiserFamily, ProblemSpec};
use crate::ensembles::{Adversary, CorruptionSpec, EnsembleSpec};
use crate::error::{Error, Result};
use crate::forest::{CalibrationOptions, SlackPolicy};
use crate::lsth::{LshConfig, SolverConfig, SolverKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub mc_samples: usize,
    /// Seed of the calibration batch, shared by every experiment seed.
    pub seed: u64,
    pub degree: usize,
    pub s_n: Option<f64>,
    pub c_k: Option<f64>,
    pub policy: SlackPolicy,
    pub enforce_standard_error: bool,
    /// Directory of cached statistics tables; none disables caching.
    pub cache_dir: Option<PathBuf>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            mc_samples: 400,
            seed: 0,
            degree: 2,
            s_n: None,
            c_k: None,
            policy: SlackPolicy::default(),
            enforce_standard_error: false,
            cache_dir: None,
        }
    }
}

impl CalibrationConfig {
    pub fn options(&self) -> CalibrationOptions {
        CalibrationOptions { s_n: self.s_n, c_k: self.c_k, policy: self.policy, enforce_standard_error: self.enforce_standard_error }
    }
}

/// Corruption settings; the corruption seed is derived from each
/// experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub epsilon: f64,
    pub adversary: Adversary,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self { epsilon: 0.0, adversary: Adversary::None }
    }
}

impl CorruptionConfig {
    pub fn spec(&self, seed: u64) -> CorruptionSpec {
        CorruptionSpec { epsilon: self.epsilon, adversary: self.adversary.clone(), seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub problem: ProblemSpec,
    /// One denoiser used at every step.
    #[serde(default)]
    pub denoiser: Option<Denoiser>,
    /// Per-step denoisers; takes precedence over `denoiser`.
    #[serde(default)]
    pub denoisers: Option<Vec<Denoiser>>,
    pub t: usize,
    #[serde(default)]
    pub corruption: CorruptionConfig,
    #[serde(default)]
    pub lsh: LshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub eta: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn family(&self) -> Result<DenoiserFamily> {
        match (&self.denoisers, &self.denoiser) {
            (Some(steps), _) => Ok(DenoiserFamily::new(steps.clone())),
            (None, Some(d)) => Ok(DenoiserFamily::uniform(d.clone(), self.t)),
            (None, None) => Err(Error::Config("one of `denoiser` or `denoisers` is required".into())),
        }
    }
}

/// A problem found by [`validate_config`]. `resource` marks violations of a
/// size cap rather than malformed input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
    pub resource: bool,
}

impl Violation {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into(), resource: false }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All violations of `cfg`; an empty list means the config is valid.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = cfg.ensemble.n;
    if n == 0 {
        out.push(Violation::new("ensemble.n", "ensemble.n ≥ 1"));
    }
    if !(cfg.ensemble.subgaussian_k > 0.0) {
        out.push(Violation::new("ensemble.subgaussian_k", "must be positive"));
    }
    if cfg.t == 0 {
        out.push(Violation::new("t", "at least one AMP step"));
    }
    match cfg.family() {
        Ok(fam) => {
            if let Err(e) = fam.validate(cfg.t) {
                out.push(Violation::new("denoisers", e.to_string()));
            }
        }
        Err(e) => out.push(Violation::new("denoisers", e.to_string())),
    }
    if !(cfg.eta > 0.0 && cfg.eta < 1.0) {
        out.push(Violation::new("eta", "eta ∈ (0, 1)"));
    }
    if cfg.seeds.is_empty() {
        out.push(Violation::new("seeds", "at least one seed"));
    }
    let eps = cfg.corruption.epsilon;
    if !(0.0..=1.0).contains(&eps) {
        out.push(Violation::new("corruption.epsilon", "ε ∈ [0, 1]"));
    } else if eps > 0.0 && n > 0 && eps * (n as f64) < 1.0 {
        out.push(Violation::new("corruption.epsilon", format!("ε·n = {:.3} < 1 corrupts nothing", eps * n as f64)));
    }
    if cfg.corruption.adversary == Adversary::ZeroRowsum {
        out.push(Violation::new(
            "corruption.adversary",
            "zero_rowsum is a strong contamination outside the principal-minor model",
        ));
    }
    let cal = &cfg.calibration;
    if cal.mc_samples < 2 {
        out.push(Violation::new("calibration.mc_samples", "at least 2"));
    }
    if cal.degree > crate::forest::MAX_ENUMERATION_DEGREE {
        let mut v = Violation::new("calibration.degree", format!("at most {}", crate::forest::MAX_ENUMERATION_DEGREE));
        v.resource = true;
        out.push(v);
    }
    if cfg.lsh.degree > cal.degree {
        out.push(Violation::new("lsh.degree", "lumber degree exceeds the calibrated degree"));
    }
    if !(cfg.lsh.op_norm_bound > 0.0) {
        out.push(Violation::new("lsh.op_norm_bound", "must be positive"));
    }
    if cfg.lsh.robust && n > cfg.lsh.robust_n_cap {
        let mut v = Violation::new("lsh.robust_n_cap", format!("robust mode with n = {n} exceeds the cap {}", cfg.lsh.robust_n_cap));
        v.resource = true;
        out.push(v);
    }
    let dim = crate::lsth::MonomialBasis::new(n, cfg.lsh.robust).dim();
    if dim > cfg.solver.max_dim {
        let mut v = Violation::new("solver.max_dim", format!("moment dimension {dim} exceeds the cap {}", cfg.solver.max_dim));
        v.resource = true;
        out.push(v);
    }
    if !(cfg.solver.tolerance > 0.0) {
        out.push(Violation::new("solver.tolerance", "must be positive"));
    }
    if cfg.solver.max_iters == 0 {
        out.push(Violation::new("solver.max_iters", "must be positive"));
    }
    if cfg.solver.kind == SolverKind::Admm && dim > cfg.solver.admm_max_dim {
        let mut v = Violation::new("solver.kind", format!("dense splitting at dimension {dim} exceeds {}", cfg.solver.admm_max_dim));
        v.resource = true;
        out.push(v);
    }
    if cfg.solver.rank == Some(0) {
        out.push(Violation::new("solver.rank", "must be positive"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
t = 2
eta = 0.5
seeds = [0, 1]
output_dir = "out"

[ensemble]
n = 40
family = "gaussian"

[problem]
kind = "nnpca"

[denoiser]
kind = "polynomial"
coeffs = [0.0, 1.0]

[corruption]
epsilon = 0.1
adversary = { kind = "rank_one_spike" }

[lsh]
robust = false

[solver]
tolerance = 1e-6
"#;

    #[test]
    fn sample_parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert!(validate_config(&cfg).is_empty(), "{:?}", validate_config(&cfg));
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn zero_n_is_reported() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.ensemble.n = 0;
        assert!(validate_config(&cfg).iter().any(|v| v.message == "ensemble.n ≥ 1"));
    }

    #[test]
    fn robust_cap_is_a_resource_violation() {
        let mut cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        cfg.ensemble.n = 100;
        cfg.lsh.robust = true;
        let v = validate_config(&cfg);
        assert!(v.iter().any(|v| v.resource && v.message.contains("cap 60")), "{v:?}");
    }
}
