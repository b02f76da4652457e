//! Online controller for training-pipeline configuration.
//!
//! Four agents (augmentation, optimizer, learning-rate schedule, loss) each
//! pick one strategy per decision interval from a discrete catalog. The joint
//! choice is executed by an [`env::Environment`], scored with a composite
//! reward, stored in a shared replay buffer, and learned from with per-agent
//! Q-networks (or bandit policies).
//!
//! The crate ships two concrete environments: a seeded synthetic trainer with
//! phase-dependent strategy effectiveness and long-tail class imbalance, and a
//! tabular MDP with value-iteration used as a convergence oracle. External
//! trainers can drive the controller through the line-delimited JSON
//! [`bridge`].

pub mod bridge;
pub mod catalog;
pub mod commands;
pub mod config;
pub mod coordinator;
pub mod curiosity;
pub mod env;
pub mod error;
pub mod experiments;
pub mod qlearn;
pub mod replay;
pub mod reward;
pub mod rng;
pub mod state;

pub use catalog::{build_default_catalog, ActionSpace, Catalog, Component, JointConfig};
pub use config::RunConfig;
pub use error::{Error, Result};
