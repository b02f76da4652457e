//! Per-agent action-value learning and selection policies.

pub mod bandit;
pub mod dqn;
pub mod mlp;
pub mod policy;
pub mod schedule;
pub mod tabular;

pub use bandit::{ArmStats, EpsGreedyBandit, Thompson, Ucb1};
pub use dqn::{q_forward, sync_target, td_target, td_update, td_update_batch, AgentConfig, DqnAgent, PolicyKind, TargetNetwork, TdOutcome, TdSample};
pub use mlp::Mlp;
pub use policy::{argmax, epsilon_greedy, Agent, Selection};
pub use schedule::ExplorationSchedule;
