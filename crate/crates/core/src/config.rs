//! Run configuration: a single JSON document, every field optional.
//!
//! Precedence is command-line flags over file values over these defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordinator::AblationMask;
use crate::curiosity::CuriosityConfig;
use crate::error::{Error, Result};
use crate::qlearn::AgentConfig;
use crate::replay::DEFAULT_CAPACITY;
use crate::reward::RewardParams;
use crate::state::EmaPair;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationConfig {
    pub eps_start: f64,
    pub eps_end: f64,
    /// Decay horizon in decision steps; all training steps of the run when absent.
    pub horizon: Option<u64>,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_end: 0.1,
            horizon: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Shipped surrogate preset (`default`, `rho1`, ..., `deceptive`).
    pub preset: String,
    /// Surrogate spec file; overrides `preset`.
    pub spec_path: Option<PathBuf>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            preset: "default".into(),
            spec_path: None,
        }
    }
}

impl EnvConfig {
    pub fn load_spec(&self) -> Result<crate::env::SyntheticTrainerSpec> {
        match &self.spec_path {
            Some(p) => crate::env::SyntheticTrainerSpec::load(p),
            None => crate::env::SyntheticTrainerSpec::preset(&self.preset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub env: EnvConfig,
    /// Cap on decision steps per episode; the environment horizon when absent.
    pub steps: Option<usize>,
    /// Training episodes; the controller keeps its agents across episodes.
    pub episodes: usize,
    /// Run one extra exploitation-only episode after training.
    pub evaluate: bool,
    pub agent: AgentConfig,
    pub exploration: ExplorationConfig,
    pub reward: RewardParams,
    pub curiosity: CuriosityConfig,
    pub ema: EmaPair,
    pub replay_capacity: usize,
    /// Learning starts once the buffer holds `min_fill_factor * minibatch` transitions.
    pub min_fill_factor: usize,
    pub mask: AblationMask,
    /// False gives every agent its own component-attributed reward.
    pub coordination: bool,
    pub catalog_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            env: EnvConfig::default(),
            steps: None,
            episodes: 1,
            evaluate: false,
            agent: AgentConfig::default(),
            exploration: ExplorationConfig::default(),
            reward: RewardParams::default(),
            curiosity: CuriosityConfig::default(),
            ema: EmaPair::default(),
            replay_capacity: DEFAULT_CAPACITY,
            min_fill_factor: 10,
            mask: AblationMask::default(),
            coordination: true,
            catalog_path: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::InvalidInput(format!("unsupported config version {}", self.version)));
        }
        if self.steps == Some(0) {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        if self.episodes == 0 {
            return Err(Error::InvalidInput("episodes must be >= 1".into()));
        }
        if self.replay_capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be >= 1".into()));
        }
        let e = &self.exploration;
        if !(0.0 < e.eps_end && e.eps_end <= e.eps_start && e.eps_start <= 1.0) || e.horizon == Some(0) {
            return Err(Error::InvalidInput("exploration needs 0 < eps_end <= eps_start <= 1 and horizon >= 1".into()));
        }
        self.agent.validate()?;
        self.reward.validate()?;
        self.curiosity.validate()?;
        self.ema.validate()?;
        Ok(())
    }

    pub fn load_catalog(&self) -> Result<crate::Catalog> {
        match &self.catalog_path {
            Some(p) => crate::Catalog::load(p),
            None => Ok(crate::build_default_catalog()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 9;
        cfg.reward.weights.w_map = 1.4;
        cfg.mask = AblationMask::parse("no-aug").unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"episodes": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"agent": {"gamma": 1.0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"version": 2}"#).is_err());
    }
}
