//! Experiment configuration: a JSON document with a versioned schema. Every
//! field has a default, so `{"schema_version": 1}` is a complete config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shadowlab::cesaro::LevelSchedule;
use shadowlab::concat::GrowthRule;
use shadowlab::density::{DEFAULT_HORIZON, DEFAULT_TAIL_FRACTION};
use shadowlab::disk_example::build_disk_system;
use shadowlab::pseudo_orbit::{JumpRule, DEFAULT_PAIR_BUDGET};
use shadowlab::shadow::ShadowParams;
use shadowlab::space::DEFAULT_NET_CAP;
use shadowlab::{Point, System};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_HORIZON: usize = 10;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Defaults to the unit disk with the swap and halving maps and the
    /// alternating word.
    pub system: Option<System>,
    pub seed: u64,
    pub horizon: usize,
    pub tail_fraction: f64,
    pub thresholds: Thresholds,
    /// Net mesh for the shadowing searches.
    pub mesh: f64,
    pub net_cap: usize,
    /// Serialized pseudo-orbit (or CSV sequence for `cesaro`) consumed by
    /// the subcommands that take an input.
    pub input: Option<PathBuf>,
    pub generate: GenerateConfig,
    pub classify: ClassifyConfig,
    pub repair: RepairConfig,
    pub cesaro: CesaroConfig,
    pub concat: ConcatConfig,
    pub search: SearchConfig,
    pub example_disk: DiskConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            system: None,
            seed: 0,
            horizon: DEFAULT_HORIZON,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            thresholds: Thresholds::default(),
            mesh: 0.1,
            net_cap: DEFAULT_NET_CAP,
            input: None,
            generate: GenerateConfig::default(),
            classify: ClassifyConfig::default(),
            repair: RepairConfig::default(),
            cesaro: CesaroConfig::default(),
            concat: ConcatConfig::default(),
            search: SearchConfig::default(),
            example_disk: DiskConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub delta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub tol: f64,
    /// Upper density allowed for the exceptional set of an ergodic
    /// pseudo-orbit.
    pub density_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            delta: 0.4,
            epsilon: 0.1,
            alpha: 0.5,
            tol: 0.01,
            density_tol: 0.02,
        }
    }
}

/// Which steps of a generated orbit are corrupted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Corruption {
    None,
    /// Perfect squares `k² < H`.
    #[default]
    Squares,
    Indices { indices: Vec<usize> },
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    /// Defaults to a point drawn from the seed.
    pub start: Option<Point>,
    pub corruption: Corruption,
    pub jump: JumpRule,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            start: None,
            corruption: Corruption::Squares,
            jump: JumpRule::Uniform,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scan {
    Full { budget: u64 },
    Sampled { samples: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Minimal window length of the average check; defaults to the surgery
    /// block length for `δ`.
    pub window: Option<usize>,
    pub scan: Scan,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            window: None,
            scan: Scan::Full {
                budget: DEFAULT_PAIR_BUDGET as u64,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairConfig {
    /// Inputs with at most this many bad steps are returned unchanged.
    pub finite_cutoff: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CesaroConfig {
    /// Bound `B` on the sequence; defaults to its maximum.
    pub bound: Option<f64>,
    pub margin: f64,
    pub schedule: LevelSchedule,
    /// Tolerance of the equivalence check.
    pub tol: f64,
}

impl Default for CesaroConfig {
    fn default() -> Self {
        CesaroConfig {
            bound: None,
            margin: shadowlab::cesaro::DEFAULT_DENSITY_MARGIN,
            schedule: LevelSchedule::Harmonic,
            tol: 0.02,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcatConfig {
    pub lengths: Vec<usize>,
    /// Step error level of each generated block.
    pub levels: Vec<f64>,
    pub growth: GrowthRule,
}

impl Default for ConcatConfig {
    fn default() -> Self {
        ConcatConfig {
            lengths: vec![8, 80, 1024],
            levels: vec![0.5, 0.25, 0.15],
            growth: GrowthRule::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Decreasing meshes of the refined search; empty skips it.
    pub refined_meshes: Vec<f64>,
    pub epsilon0: f64,
    pub slack: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            refined_meshes: Vec::new(),
            epsilon0: 0.4,
            slack: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiskInstance {
    /// Seeded start, step `i` displaced by `1/(i+1)²`.
    #[default]
    Decaying,
    /// The true orbit of `(0.5, 0.5)` traced from `(0, 0)`.
    TrueOrbit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiskConfig {
    pub instance: DiskInstance,
    /// Levels reported against the tail maximum of the tracking means.
    pub levels: Vec<f64>,
}

impl Default for DiskConfig {
    fn default() -> Self {
        DiskConfig {
            instance: DiskInstance::Decaying,
            levels: vec![0.1, 0.01],
        }
    }
}

/// A field-level configuration error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

fn field(name: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("`{name}` {reason}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        if value.get("schema_version").is_none() {
            return Err(field("schema_version", "is required"));
        }
        serde_json::from_value(value).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn system(&self) -> System {
        self.system.clone().unwrap_or_else(build_disk_system)
    }

    pub fn shadow_params(&self) -> ShadowParams {
        ShadowParams {
            epsilon: self.thresholds.epsilon,
            alpha: self.thresholds.alpha,
            tol: self.thresholds.tol,
            tail_fraction: self.tail_fraction,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field(
                "schema_version",
                format!("must be {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.horizon < MIN_HORIZON {
            return Err(field("horizon", format!("must be at least {MIN_HORIZON}, got {}", self.horizon)));
        }
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(field(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field(name, format!("must be positive, got {v}")))
            }
        };
        open_unit("tail_fraction", self.tail_fraction)?;
        let t = &self.thresholds;
        positive("thresholds.delta", t.delta)?;
        positive("thresholds.epsilon", t.epsilon)?;
        open_unit("thresholds.alpha", t.alpha)?;
        positive("thresholds.tol", t.tol)?;
        positive("thresholds.density_tol", t.density_tol)?;
        positive("mesh", self.mesh)?;
        if self.net_cap == 0 {
            return Err(field("net_cap", "must be positive"));
        }
        if let Scan::Sampled { samples: 0 } = self.classify.scan {
            return Err(field("classify.scan.samples", "must be positive"));
        }
        if self.classify.window == Some(0) {
            return Err(field("classify.window", "must be positive"));
        }
        if let Some(b) = self.cesaro.bound {
            positive("cesaro.bound", b)?;
        }
        if !(self.cesaro.margin > 0.0 && self.cesaro.margin <= 1.0) {
            return Err(field("cesaro.margin", format!("must lie in (0, 1], got {}", self.cesaro.margin)));
        }
        positive("cesaro.tol", self.cesaro.tol)?;
        self.cesaro
            .schedule
            .validate()
            .map_err(|e| field("cesaro.schedule", e))?;
        let c = &self.concat;
        if c.lengths.is_empty() || c.lengths.contains(&0) {
            return Err(field("concat.lengths", "must be a nonempty list of positive lengths"));
        }
        if c.levels.len() != c.lengths.len() {
            return Err(field(
                "concat.levels",
                format!("needs one level per block ({}), got {}", c.lengths.len(), c.levels.len()),
            ));
        }
        if let Some(l) = c.levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(field("concat.levels", format!("must be nonnegative, got {l}")));
        }
        positive("concat.growth.ratio", c.growth.ratio)?;
        let s = &self.search;
        if let Some(m) = s.refined_meshes.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return Err(field("search.refined_meshes", format!("must be positive, got {m}")));
        }
        if s.refined_meshes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(field("search.refined_meshes", "must be strictly decreasing"));
        }
        positive("search.epsilon0", s.epsilon0)?;
        if !(s.slack >= 0.0 && s.slack.is_finite()) {
            return Err(field("search.slack", format!("must be nonnegative, got {}", s.slack)));
        }
        if let Some(l) = self.example_disk.levels.iter().find(|l| !(**l > 0.0)) {
            return Err(field("example_disk.levels", format!("must be positive, got {l}")));
        }
        if let Some(p) = &self.generate.start {
            let system = self.system();
            if !system.space().contains(p) {
                return Err(field("generate.start", format!("{:?} lies outside the {} space", p.coords(), system.space().name())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::parse(r#"{"schema_version": 1}"#).unwrap();
        c.validate().unwrap();
        assert_eq!(c.horizon, 10_000);
        assert_eq!(c.tail_fraction, 0.5);
    }

    #[test]
    fn field_errors_name_the_field() {
        let e = ExperimentConfig::parse(r#"{"schema_version": 1, "horizon": 5}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(e.0.contains("horizon"), "{e}");
        let e = ExperimentConfig::parse(r#"{"schema_version": 1, "thresholds": {"alpha": 1.0}}"#)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(e.0.contains("thresholds.alpha"), "{e}");
        let e = ExperimentConfig::parse(r#"{"schema_version": 1, "horizn": 50}"#).unwrap_err();
        assert!(e.0.contains("horizn"), "{e}");
        assert!(ExperimentConfig::parse(r#"{"horizon": 50}"#).is_err());
    }

    #[test]
    fn system_descriptor_parses() {
        let text = r#"{
            "schema_version": 1,
            "system": {
                "family": {"space": {"kind": "circle-1d"}, "maps": [{"kind": "identity"}]},
                "word": {"alphabet": 1, "rule": "constant", "symbol": 1}
            }
        }"#;
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.system().space().name(), "circle-1d");
    }
}
