//! Environments the controller can drive.

pub mod mdp;
pub mod metrics;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::catalog::JointConfig;
use crate::error::{Error, Result};

pub use mdp::{value_iteration, QTable, TabularMdp};
pub use synthetic::{retention_fraction, SyntheticTrainer, SyntheticTrainerSpec};

/// Metrics emitted after a reset or one decision interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub map_val: f64,
    pub rare_f1: f64,
    pub head_f1: f64,
    pub mid_f1: f64,
    pub tail_f1: f64,
    pub bacc: f64,
    pub loss_train: f64,
    pub loss_val: f64,
    pub grad_norm: f64,
    pub rel_update_mag: f64,
    pub texture_richness: f64,
    pub terminal: bool,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("map_val", self.map_val),
            ("rare_f1", self.rare_f1),
            ("head_f1", self.head_f1),
            ("mid_f1", self.mid_f1),
            ("tail_f1", self.tail_f1),
            ("bacc", self.bacc),
            ("texture_richness", self.texture_richness),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Env(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let nonneg = [
            ("loss_train", self.loss_train),
            ("loss_val", self.loss_val),
            ("grad_norm", self.grad_norm),
            ("rel_update_mag", self.rel_update_mag),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Env(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// A training process that executes one joint configuration per decision interval.
pub trait Environment {
    /// Starts a new episode and returns the metrics before any decision.
    fn reset(&mut self, seed: u64) -> Result<MetricsReport>;

    /// Runs one decision interval under `config`.
    fn execute(&mut self, config: &JointConfig) -> Result<MetricsReport>;

    /// Number of `execute` calls per episode.
    fn horizon(&self) -> usize;

    /// Per-component share of the last interval's progress, if the environment
    /// can attribute it. Used by the uncoordinated ablation.
    fn component_gains(&self) -> Option<[f64; 4]> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn reset(&mut self, seed: u64) -> Result<MetricsReport> {
        (**self).reset(seed)
    }

    fn execute(&mut self, config: &JointConfig) -> Result<MetricsReport> {
        (**self).execute(config)
    }

    fn horizon(&self) -> usize {
        (**self).horizon()
    }

    fn component_gains(&self) -> Option<[f64; 4]> {
        (**self).component_gains()
    }
}
