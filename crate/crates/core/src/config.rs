//! Run configuration: one TOML document selecting an algorithm/environment pair and
//! carrying every hyperparameter.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{DepthGains, HeadingGains};
use crate::dpg::DpgConfig;
use crate::dynamics::VehicleParams;
use crate::env::{GridConfig, PipeConfig, SeafloorConfig, TerrainConfig};
use crate::error::{Error, Result};
use crate::pg::{PpoConfig, ReinforceConfig};
use crate::tabular::TabularConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    TabularQ,
    Reinforce,
    Ppo,
    Dpg,
    /// No learning: the PID autopilot of the selected task, evaluated like a policy.
    Pid,
}

impl Algorithm {
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::TabularQ => "tabular-q",
            Algorithm::Reinforce => "reinforce",
            Algorithm::Ppo => "ppo",
            Algorithm::Dpg => "dpg",
            Algorithm::Pid => "pid",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Seafloor,
    Pipe,
    Grid,
}

impl EnvKind {
    pub fn tag(self) -> &'static str {
        match self {
            EnvKind::Seafloor => "seafloor",
            EnvKind::Pipe => "pipe",
            EnvKind::Grid => "grid",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seafloor" => Ok(EnvKind::Seafloor),
            "pipe" => Ok(EnvKind::Pipe),
            "grid" => Ok(EnvKind::Grid),
            other => Err(Error::config("environment", format!("unknown environment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub depth: DepthGains,
    pub heading: HeadingGains,
}

/// Replay pre-fill with PID transitions before DPG training.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarmStartConfig {
    pub steps: usize,
    /// Gaussian action noise as a fraction of each thrust limit.
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub environment: EnvKind,
    /// Root of every random stream in the run.
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Evaluate the current policy every this many training episodes (0 disables).
    #[serde(default)]
    pub eval_every: usize,
    /// Episodes per evaluation, both periodic and final.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub seafloor: SeafloorConfig,
    #[serde(default)]
    pub terrain: TerrainConfig,
    #[serde(default)]
    pub pipe: PipeConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tabular: TabularConfig,
    #[serde(default)]
    pub dpg: DpgConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub reinforce: ReinforceConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub warm_start: WarmStartConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_episodes() -> usize {
    10
}

/// Best-effort extraction of the offending key from a TOML error message.
fn field_of(message: &str) -> String {
    for marker in ["missing field `", "unknown field `"] {
        if let Some(start) = message.find(marker) {
            let rest = &message[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    "<document>".to_string()
}

impl TrainConfig {
    /// A configuration with every section at its default.
    pub fn new(algorithm: Algorithm, environment: EnvKind, seed: u64) -> Self {
        Self {
            algorithm,
            environment,
            seed,
            output_dir: default_output_dir(),
            eval_every: 0,
            eval_episodes: default_eval_episodes(),
            vehicle: VehicleParams::default(),
            seafloor: SeafloorConfig::default(),
            terrain: TerrainConfig::default(),
            pipe: PipeConfig::default(),
            grid: GridConfig::default(),
            tabular: TabularConfig::default(),
            dpg: DpgConfig::default(),
            ppo: PpoConfig::default(),
            reinforce: ReinforceConfig::default(),
            baselines: BaselineConfig::default(),
            warm_start: WarmStartConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            Error::Config {
                field: field_of(&message),
                message,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::config("seed", "must fit in a signed 64-bit integer"));
        }
        self.vehicle.validate()?;
        match self.environment {
            EnvKind::Seafloor => {
                self.seafloor.validate(&self.vehicle)?;
                self.terrain.validate()?;
            }
            EnvKind::Pipe => self.pipe.validate()?,
            EnvKind::Grid => {
                crate::env::GridWorld::new(self.grid.clone())?;
            }
        }
        let tabular_env = self.environment == EnvKind::Grid;
        match self.algorithm {
            Algorithm::TabularQ if !tabular_env => {
                return Err(Error::config(
                    "environment",
                    "tabular-q runs on the grid environment only",
                ))
            }
            Algorithm::Reinforce | Algorithm::Ppo | Algorithm::Dpg | Algorithm::Pid if tabular_env => {
                return Err(Error::config(
                    "environment",
                    format!("{} needs a continuous environment (seafloor or pipe)", self.algorithm),
                ))
            }
            _ => {}
        }
        match self.algorithm {
            Algorithm::TabularQ => self.tabular.validate()?,
            Algorithm::Reinforce => self.reinforce.validate()?,
            Algorithm::Ppo => self.ppo.validate()?,
            Algorithm::Dpg => self.dpg.validate()?,
            Algorithm::Pid => {}
        }
        self.baselines.depth.validate()?;
        self.baselines.heading.validate()?;
        if !(self.warm_start.noise >= 0.0) {
            return Err(Error::config("warm_start.noise", "must be >= 0"));
        }
        if self.warm_start.steps > 0 && self.algorithm != Algorithm::Dpg {
            return Err(Error::config("warm_start.steps", "replay pre-fill applies to dpg only"));
        }
        if self.warm_start.steps > 0 && self.environment != EnvKind::Seafloor {
            return Err(Error::config("warm_start.steps", "PID pre-fill is available for the seafloor task"));
        }
        Ok(())
    }
}
