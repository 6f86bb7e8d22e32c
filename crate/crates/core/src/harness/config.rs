//! Run configuration: a single TOML file whose sections mirror the parameter
//! structs. Missing keys take their defaults. The config hash recorded in
//! traces is the SHA-256 of the normalised TOML rendering.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{PiState, SwitchingGains};
use crate::harness::exchange::ExchangeConfig;
use crate::harness::runner::ControllerSet;
use crate::observer::EkfConfig;
use crate::plant::PlantParams;
use crate::rl::{QNetwork, TrainConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub mixing: Option<PathBuf>,
    pub reservoir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExchangeSettings {
    pub poll_ms: u64,
    pub budget_ms: u64,
}

impl Default for ExchangeSettings {
    fn default() -> Self {
        Self { poll_ms: 50, budget_ms: 10_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub plant: PlantParams,
    pub ekf: EkfConfig,
    pub switching: SwitchingGains,
    pub pi: PiState,
    pub weights: Weights,
    pub exchange: ExchangeSettings,
    pub train: TrainConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.ekf.validate()?;
        self.switching.validate(&self.plant)?;
        self.train.validate()
    }

    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Controller settings with any configured weights loaded.
    pub fn controller_set(&self) -> Result<ControllerSet> {
        let load = |p: &Option<PathBuf>| -> Result<Option<Arc<QNetwork>>> {
            p.as_deref().map(|p| QNetwork::load(p).map(Arc::new)).transpose()
        };
        Ok(ControllerSet {
            params: self.plant,
            ekf: self.ekf,
            gains: self.switching,
            pi: PiState { integral: 0.0, u_prev: 0.0, ..self.pi },
            mixing_net: load(&self.weights.mixing)?,
            reservoir_net: load(&self.weights.reservoir)?,
            config_hash: self.hash()?,
        })
    }

    pub fn exchange(&self, dir: impl Into<PathBuf>) -> ExchangeConfig {
        ExchangeConfig {
            poll_interval: Duration::from_millis(self.exchange.poll_ms),
            budget: Duration::from_millis(self.exchange.budget_ms),
            ..ExchangeConfig::new(dir)
        }
    }
}
