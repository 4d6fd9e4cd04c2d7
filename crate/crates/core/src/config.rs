//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convergence::{ReferenceMode, StudySpec};
use crate::lattice::JumpMode;
use crate::model::{Payoff, RawModel};
use crate::montecarlo::MCConfig;
use crate::pricer::{ExerciseStyle, PricerConfig, DEFAULT_STATE_BUDGET};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config error at `{path}`: {message}")]
    Invalid { path: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: RawModel,
    pub payoff: Payoff,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub mc: MCConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    #[serde(default)]
    pub jump_mode: JumpMode,
    #[serde(default = "default_state_budget")]
    pub state_budget: usize,
    #[serde(default)]
    pub exercise: ExerciseStyle,
    #[serde(default)]
    pub reference: Option<ReferenceMode>,
    #[serde(default = "default_tail_samples")]
    pub tail_samples: usize,
    #[serde(default = "default_richardson_order")]
    pub richardson_order: f64,
    #[serde(default)]
    pub lsmc_band: bool,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_state_budget() -> usize {
    DEFAULT_STATE_BUDGET
}

fn default_tail_samples() -> usize {
    100_000
}

fn default_richardson_order() -> f64 {
    1.0
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n: None,
            n_list: None,
            jump_mode: JumpMode::Native,
            state_budget: DEFAULT_STATE_BUDGET,
            exercise: ExerciseStyle::American,
            reference: None,
            tail_samples: default_tail_samples(),
            richardson_order: 1.0,
            lsmc_band: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Significant digits of printed numbers.
    #[serde(default = "default_precision")]
    pub precision: usize,
    /// Fill the `seconds` column. Off by default so reruns are byte-identical.
    #[serde(default)]
    pub timing: bool,
}

fn default_precision() -> usize {
    12
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { csv: None, precision: 12, timing: false }
    }
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jump_mode: Option<JumpMode>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse { path, message: e.into_inner().to_string() }
        })?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn check(&self) -> Result<(), ConfigError> {
        let invalid = |path, message: &str| Err(ConfigError::Invalid { path, message: message.to_string() });
        if self.engine.n == Some(0) {
            return invalid("engine.n", "must be at least 1");
        }
        if let Some(list) = &self.engine.n_list {
            if list.iter().any(|n| *n == 0) {
                return invalid("engine.n_list", "entries must be at least 1");
            }
        }
        if self.engine.threads == Some(0) {
            return invalid("engine.threads", "must be at least 1");
        }
        if !(self.engine.richardson_order > 0.0) {
            return invalid("engine.richardson_order", "must be positive");
        }
        if self.output.precision == 0 || self.output.precision > 17 {
            return invalid("output.precision", "must be between 1 and 17");
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(n) = o.n {
            self.engine.n = Some(n);
        }
        if let Some(seed) = o.seed {
            self.mc.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.csv = Some(out.clone());
        }
        if let Some(mode) = o.jump_mode {
            self.engine.jump_mode = mode;
        }
        if let Some(t) = o.threads {
            self.engine.threads = Some(t);
        }
    }

    /// Steps for a single price: `engine.n`, else the largest ladder entry.
    pub fn steps(&self) -> Result<usize, ConfigError> {
        self.engine
            .n
            .or_else(|| self.engine.n_list.as_ref().and_then(|l| l.iter().copied().max()))
            .ok_or(ConfigError::Invalid { path: "engine.n", message: "missing; set engine.n or engine.n_list".into() })
    }

    pub fn pricer(&self) -> PricerConfig {
        PricerConfig { state_budget: self.engine.state_budget, threads: self.engine.threads, exercise_stats: false }
    }

    pub fn study(&self) -> Result<StudySpec, ConfigError> {
        let n_list = self.engine.n_list.clone().ok_or(ConfigError::Invalid {
            path: "engine.n_list",
            message: "missing; a convergence study needs a ladder".into(),
        })?;
        let reference = self.engine.reference.unwrap_or(match self.engine.exercise {
            ExerciseStyle::American => ReferenceMode::Richardson,
            ExerciseStyle::European => ReferenceMode::ClosedForm,
        });
        Ok(StudySpec {
            n_list,
            style: self.engine.exercise,
            reference,
            jump_mode: self.engine.jump_mode,
            tail_samples: self.engine.tail_samples,
            richardson_order: self.engine.richardson_order,
            lsmc_band: self.engine.lsmc_band,
            pricer: self.pricer(),
        })
    }
}
