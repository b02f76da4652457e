//! Lookup-table Q-learning, the network-free special case of the TD update.
//!
//! Used to check that the update rule converges to the Bellman optimum on an
//! MDP with known dynamics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dqn::td_target;
use crate::env::mdp::{QTable, TabularMdp};

/// Robbins-Monro step sizes indexed by the visit count `n >= 1` of a state-action pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    /// `1 / n^omega`, `omega` in `(0.5, 1]`.
    Polynomial { omega: f64 },
    /// `1 / (1 + (1 - gamma) * (n - 1))`.
    RescaledLinear,
}

impl StepSize {
    pub fn at(&self, n: u64, gamma: f64) -> f64 {
        let n = n.max(1) as f64;
        match *self {
            StepSize::Polynomial { omega } => n.powf(-omega),
            StepSize::RescaledLinear => 1.0 / (1.0 + (1.0 - gamma) * (n - 1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularQ {
    pub q: QTable,
    visits: Vec<u64>,
}

impl TabularQ {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            q: QTable::zeros(n_states, n_actions),
            visits: vec![0; n_states * n_actions],
        }
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[s * self.q.n_actions + a]
    }

    /// `Q(s,a) <- Q(s,a) + alpha_n * (y - Q(s,a))`; returns the TD error.
    pub fn update(&mut self, s: usize, a: usize, reward: f64, next: usize, terminal: bool, gamma: f64, step: StepSize) -> f64 {
        let idx = s * self.q.n_actions + a;
        self.visits[idx] += 1;
        let alpha = step.at(self.visits[idx], gamma);
        let y = td_target(reward, gamma, self.q.row(next), terminal);
        let delta = y - self.q.values[idx];
        self.q.values[idx] += alpha * delta;
        delta
    }
}

/// Off-policy Q-learning along one trajectory of `mdp` under an epsilon-greedy
/// behaviour policy, for exactly `updates` transitions.
pub fn learn_mdp<R: Rng + ?Sized>(mdp: &TabularMdp, updates: usize, behaviour_eps: f64, step: StepSize, rng: &mut R) -> TabularQ {
    let mut agent = TabularQ::new(mdp.n_states, mdp.n_actions);
    let mut s = 0;
    for _ in 0..updates {
        let a = super::policy::epsilon_greedy(agent.q.row(s), behaviour_eps, rng);
        let next = mdp.sample_next(s, a, rng);
        agent.update(s, a, mdp.rewards[s][a], next, false, mdp.gamma, step);
        s = next;
    }
    agent
}
