//! Scenario configuration, read from TOML.
//!
//! ```toml
//! experiment = "single_run"
//! seed = 7
//! output_dir = "out/run"
//!
//! [params]
//! d1 = 1.0
//! d2 = 1.0
//! lambda1 = 1.0
//! lambda2 = 1.0
//!
//! [grid]
//! r_max = 20.0
//! n = 512
//!
//! [stepper]
//! dt = 0.01
//! t_end = 10.0
//!
//! [initial]
//! width = 1.0
//! bounded_fraction = 0.5
//! ```
//!
//! Every section and key is optional; missing values take the defaults below.

use std::path::{Path, PathBuf};

use chemo4d::{Params, StepperConfig, Thresholds};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    SingleRun,
    MassSweep,
    InequalitySuite,
    PicardCrosscheck,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::SingleRun => "single_run",
            Experiment::MassSweep => "mass_sweep",
            Experiment::InequalitySuite => "inequality_suite",
            Experiment::PicardCrosscheck => "picard_crosscheck",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub r_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { r_max: 20.0, n: 512 }
    }
}

/// Initial `v0, w0` accompanying the bump `u0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignalInit {
    #[default]
    Zero,
    /// `w0 = (-d2 Lap + l2)^{-1} u0`, `v0 = (-d1 Lap + l1)^{-1} w0`.
    QuasiSteady,
}

/// Gaussian bump `u0` of the given width and mass. The mass is either
/// absolute or a fraction of the boundedness threshold; with neither set it
/// is half the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    pub width: f64,
    pub mass: Option<f64>,
    pub bounded_fraction: Option<f64>,
    pub signal: SignalInit,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            width: 1.0,
            mass: None,
            bounded_fraction: None,
            signal: SignalInit::Zero,
        }
    }
}

impl InitialSpec {
    pub fn resolved_mass(&self, thresholds: &Thresholds) -> f64 {
        match (self.mass, self.bounded_fraction) {
            (Some(m), _) => m,
            (None, Some(f)) => f * thresholds.m_bounded,
            (None, None) => 0.5 * thresholds.m_bounded,
        }
    }
}

/// Sweep masses: absolute values plus fractions of the boundedness threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub masses: Vec<f64>,
    pub bounded_fractions: Vec<f64>,
}

impl SweepSpec {
    /// Absolute masses followed by the scaled fractions.
    pub fn resolved(&self, thresholds: &Thresholds) -> Vec<f64> {
        self.masses
            .iter()
            .copied()
            .chain(self.bounded_fractions.iter().map(|f| f * thresholds.m_bounded))
            .collect()
    }
}

/// Random witness suite, evaluated on its own fine grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub witnesses: usize,
    pub r_max: f64,
    pub n: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            witnesses: 100,
            r_max: 20.0,
            n: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosscheckSpec {
    pub t_final: f64,
    /// Graded mesh intervals of the mild solver.
    pub mesh: usize,
    /// Longest semigroup substep.
    pub max_substep: f64,
    /// Step of the comparison run.
    pub imex_dt: f64,
    pub k_max: usize,
    pub tol: f64,
}

impl Default for CrosscheckSpec {
    fn default() -> Self {
        Self {
            t_final: 0.05,
            mesh: 64,
            max_substep: 1e-3,
            imex_dt: 1e-4,
            k_max: 60,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "Params::unit")]
    pub params: Params,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub suite: SuiteSpec,
    #[serde(default)]
    pub crosscheck: CrosscheckSpec,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::default(),
            seed: 0,
            output_dir: default_output_dir(),
            params: Params::unit(),
            grid: GridSpec::default(),
            stepper: StepperConfig::default(),
            initial: InitialSpec::default(),
            sweep: None,
            suite: SuiteSpec::default(),
            crosscheck: CrosscheckSpec::default(),
        }
    }
}

fn positive(name: &str, x: f64) -> CliResult<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        self.stepper.validate()?;
        positive("grid.r_max", self.grid.r_max)?;
        positive("initial.width", self.initial.width)?;
        if self.initial.mass.is_some() && self.initial.bounded_fraction.is_some() {
            return Err(CliError::Config(
                "initial.mass and initial.bounded_fraction are mutually exclusive".into(),
            ));
        }
        if let Some(m) = self.initial.mass {
            if !(m.is_finite() && m >= 0.0) {
                return Err(CliError::Config(format!("initial.mass must be nonnegative, got {m}")));
            }
        }
        if let Some(f) = self.initial.bounded_fraction {
            positive("initial.bounded_fraction", f)?;
        }
        if let Some(sweep) = &self.sweep {
            let masses = sweep.resolved(&self.params.thresholds());
            for &m in &masses {
                positive("sweep mass", m)?;
            }
            if masses.windows(2).any(|w| w[1] < w[0]) {
                return Err(CliError::Config("sweep masses must be sorted ascending".into()));
            }
        }
        if self.suite.witnesses == 0 {
            return Err(CliError::Config("suite.witnesses must be at least 1".into()));
        }
        positive("suite.r_max", self.suite.r_max)?;
        let c = &self.crosscheck;
        positive("crosscheck.t_final", c.t_final)?;
        if c.t_final > 0.5 {
            return Err(CliError::Config(format!(
                "crosscheck.t_final must not exceed 0.5, got {}",
                c.t_final
            )));
        }
        positive("crosscheck.max_substep", c.max_substep)?;
        positive("crosscheck.imex_dt", c.imex_dt)?;
        positive("crosscheck.tol", c.tol)?;
        if c.mesh == 0 || c.k_max == 0 {
            return Err(CliError::Config("crosscheck.mesh and crosscheck.k_max must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, output directory excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Command-line replacements for config values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub grid_r: Option<f64>,
    pub dt: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        if let Some(n) = self.grid_n {
            cfg.grid.n = n;
        }
        if let Some(r) = self.grid_r {
            cfg.grid.r_max = r;
        }
        if let Some(dt) = self.dt {
            cfg.stepper.dt = dt;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig {
            experiment: Experiment::MassSweep,
            sweep: Some(SweepSpec {
                masses: vec![1.0, 2.0],
                bounded_fractions: vec![0.5],
            }),
            ..Default::default()
        };
        cfg.initial.signal = SignalInit::QuasiSteady;
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml("[grid]\nnodes = 3\n").is_err());
    }

    #[test]
    fn mass_resolution() {
        let th = Params::unit().thresholds();
        let mut spec = InitialSpec::default();
        assert_eq!(spec.resolved_mass(&th), 0.5 * th.m_bounded);
        spec.bounded_fraction = Some(0.25);
        assert_eq!(spec.resolved_mass(&th), 0.25 * th.m_bounded);
        spec.mass = Some(3.0);
        assert_eq!(spec.resolved_mass(&th), 3.0);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let cfg = ScenarioConfig {
            sweep: Some(SweepSpec {
                masses: vec![2.0, 1.0],
                bounded_fractions: vec![],
            }),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ScenarioConfig {
            sweep: Some(SweepSpec {
                masses: vec![0.0],
                bounded_fractions: vec![],
            }),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.crosscheck.t_final = 0.6;
        assert!(cfg.validate().is_err());
        let mut cfg = ScenarioConfig::default();
        cfg.initial.mass = Some(1.0);
        cfg.initial.bounded_fraction = Some(0.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ScenarioConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn overrides_replace_values() {
        let mut cfg = ScenarioConfig::default();
        Overrides {
            seed: Some(9),
            output_dir: Some("x".into()),
            grid_n: Some(256),
            grid_r: Some(10.0),
            dt: Some(0.005),
        }
        .apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.grid.n, cfg.grid.r_max, cfg.stepper.dt), (9, 256, 10.0, 0.005));
        assert_eq!(cfg.output_dir, PathBuf::from("x"));
    }
}
