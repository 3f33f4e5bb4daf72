//! Run configuration: a TOML document with one section per subsystem.
//!
//! ```toml
//! seed = 7
//! [constants]   # atom_mass, gravity, hbar, boltzmann, scattering_length
//! [taap]        # field parameters, tilt and target_radius
//! [solver]      # grid_points, time_step, imaginary_time_tolerance, ensemble_size
//! [matter]      # kind = "thermal" | "bec", plus [matter.thermal] and [matter.bec]
//! [sequence]    # sample_interval, start_angle and [[sequence.stages]]
//! ```
//!
//! Unknown keys are rejected. See `configs/` for complete examples.

use crate::constants::PhysicalConstants;
use crate::sequence::SequencePlan;
use crate::taap::TaapConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::TAU;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected key=value")]
    OverrideSyntax(String),
    #[error("override path `{0}` does not exist")]
    OverridePath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    /// Grid size N of the condensate solver; power of two, ≥ 256.
    pub grid_points: usize,
    /// Real- and imaginary-time step, s. Also the Verlet step of the ensemble.
    pub time_step: f64,
    /// Relative energy change per step that ends imaginary-time propagation.
    pub imaginary_time_tolerance: f64,
    /// Number of classical particles; ≥ 1000.
    pub ensemble_size: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { grid_points: 8192, time_step: 1e-5, imaginary_time_tolerance: 1e-11, ensemble_size: 100_000 }
    }
}

impl SolverParams {
    pub fn max_imaginary_steps(&self) -> usize {
        1_000_000
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatterKind {
    Thermal,
    Bec,
}

impl MatterKind {
    pub fn label(&self) -> &'static str {
        match self {
            MatterKind::Thermal => "thermal",
            MatterKind::Bec => "bec",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSpec {
    /// Physical atom number (reporting only; the cloud is collisionless).
    pub atoms: f64,
    /// K
    pub temperature: f64,
    /// Azimuthal trap the cloud is prepared in, rad/s.
    pub trap_frequency: f64,
}

impl Default for ThermalSpec {
    fn default() -> Self {
        Self { atoms: 6e4, temperature: 116e-9, trap_frequency: TAU * 15.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BecSpec {
    pub atoms: f64,
    /// Azimuthal trap the condensate is prepared in, rad/s.
    pub trap_frequency: f64,
    /// ω⊥ used for g₁D; `None` takes the value extracted from the field model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transverse_frequency: Option<f64>,
}

impl Default for BecSpec {
    fn default() -> Self {
        Self { atoms: 1e4, trap_frequency: TAU * 15.0, transverse_frequency: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatterConfig {
    pub kind: MatterKind,
    pub thermal: ThermalSpec,
    pub bec: BecSpec,
}

impl Default for MatterConfig {
    fn default() -> Self {
        Self { kind: MatterKind::Thermal, thermal: ThermalSpec::default(), bec: BecSpec::default() }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub constants: PhysicalConstants,
    pub taap: TaapConfig,
    pub solver: SolverParams,
    pub matter: MatterConfig,
    pub sequence: SequencePlan,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            constants: PhysicalConstants::default(),
            taap: TaapConfig::default(),
            solver: SolverParams::default(),
            matter: MatterConfig::default(),
            sequence: SequencePlan::default(),
        }
    }
}

/// A broken invariant, named by its dotted config path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All invariant violations of a configuration; empty when valid.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut out: Vec<(String, String)> = Vec::new();
    let c = &config.constants;
    for (name, v) in [
        ("constants.atom_mass", c.atom_mass),
        ("constants.gravity", c.gravity),
        ("constants.hbar", c.hbar),
        ("constants.boltzmann", c.boltzmann),
        ("constants.scattering_length", c.scattering_length),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            out.push((name.into(), format!("must be > 0, got {v}")));
        }
    }
    out.extend(config.taap.violations());

    let s = &config.solver;
    if !(s.grid_points >= 256 && s.grid_points.is_power_of_two()) {
        out.push(("solver.grid_points".into(), format!("must be a power of two >= 256, got {}", s.grid_points)));
    }
    if !(s.time_step > 0.0 && s.time_step.is_finite()) {
        out.push(("solver.time_step".into(), format!("must be > 0, got {}", s.time_step)));
    }
    if !(s.imaginary_time_tolerance > 0.0) {
        out.push(("solver.imaginary_time_tolerance".into(), "must be > 0".into()));
    }
    if s.ensemble_size < 1000 {
        out.push(("solver.ensemble_size".into(), format!("must be >= 1000, got {}", s.ensemble_size)));
    }

    let m = &config.matter;
    if !(m.thermal.atoms > 0.0) {
        out.push(("matter.thermal.atoms".into(), "must be > 0".into()));
    }
    if !(m.thermal.temperature >= 0.0 && m.thermal.temperature.is_finite()) {
        out.push(("matter.thermal.temperature".into(), "must be >= 0".into()));
    }
    if !(m.thermal.trap_frequency > 0.0) {
        out.push(("matter.thermal.trap_frequency".into(), "must be > 0".into()));
    }
    if !(m.bec.atoms > 0.0) {
        out.push(("matter.bec.atoms".into(), "must be > 0".into()));
    }
    if !(m.bec.trap_frequency > 0.0) {
        out.push(("matter.bec.trap_frequency".into(), "must be > 0".into()));
    }
    if let Some(w) = m.bec.transverse_frequency {
        if !(w > 0.0) {
            out.push(("matter.bec.transverse_frequency".into(), "must be > 0".into()));
        }
    }
    out.extend(config.sequence.violations());
    out.into_iter().map(|(field, message)| Violation { field, message }).collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn canonical_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Applies a `dotted.path=value` override. Array elements are addressed by
    /// index, e.g. `sequence.stages.2.tilt=0.07`. Values are parsed as TOML
    /// literals, falling back to a bare string.
    pub fn with_override(&self, assignment: &str) -> Result<Self, ConfigError> {
        let (path, raw) =
            assignment.split_once('=').ok_or_else(|| ConfigError::OverrideSyntax(assignment.to_string()))?;
        let path = path.trim();
        if path.is_empty() {
            return Err(ConfigError::OverrideSyntax(assignment.to_string()));
        }
        let value = parse_literal(raw.trim());
        let mut root = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let keys: Vec<&str> = path.split('.').collect();
        let (last, parents) = keys.split_last().expect("non-empty path");
        let mut node = &mut root;
        for key in parents {
            node = match node {
                toml::Value::Table(t) => t.get_mut(*key),
                toml::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
                _ => None,
            }
            .ok_or_else(|| ConfigError::OverridePath(path.to_string()))?;
        }
        match node {
            toml::Value::Table(t) => {
                t.insert(last.to_string(), value);
            }
            toml::Value::Array(a) => {
                let slot = last
                    .parse::<usize>()
                    .ok()
                    .and_then(|i| a.get_mut(i))
                    .ok_or_else(|| ConfigError::OverridePath(path.to_string()))?;
                *slot = value;
            }
            _ => return Err(ConfigError::OverridePath(path.to_string())),
        }
        root.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert_eq!(validate(&RunConfig::default()), vec![]);
    }

    #[test]
    fn non_power_of_two_grid_is_named() {
        let mut cfg = RunConfig::default();
        cfg.solver.grid_points = 1000;
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "solver.grid_points");
    }

    #[test]
    fn negative_time_step_is_named() {
        let mut cfg = RunConfig::default();
        cfg.solver.time_step = -1e-6;
        let v = validate(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "solver.time_step");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RunConfig::default().to_toml() + "\n[extra]\nfoo = 1\n";
        assert!(RunConfig::from_toml(&text).is_err());
        let text = RunConfig::default().to_toml().replace("gravity =", "gravvity =");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_follow_dotted_paths() {
        let cfg = RunConfig::default();
        let o = cfg.with_override("solver.grid_points=4096").unwrap();
        assert_eq!(o.solver.grid_points, 4096);
        let o = cfg.with_override("sequence.stages.2.tilt = 0.07").unwrap();
        assert_eq!(o.sequence.lens_tilt(), Some(0.07));
        let o = cfg.with_override("matter.kind=bec").unwrap();
        assert_eq!(o.matter.kind, MatterKind::Bec);
        assert!(cfg.with_override("solver.nope=1").is_err());
        assert!(cfg.with_override("solver.grid_points").is_err());
    }

    #[test]
    fn hash_ignores_formatting() {
        let cfg = RunConfig::default();
        let reformatted = RunConfig::from_toml(&cfg.to_toml().replace(" = ", "=")).unwrap();
        assert_eq!(cfg.canonical_hash(), reformatted.canonical_hash());
        assert_eq!(cfg.canonical_hash().len(), 64);
    }
}
