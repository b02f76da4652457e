//! Action selection: epsilon-greedy over Q-values, UCB1 and Thompson bandits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bandit::{Thompson, Ucb1};
use super::dqn::{AgentConfig, DqnAgent, PolicyKind, TdOutcome, TdSample};
use crate::error::Result;

/// Index of the largest value; ties go to the lowest index and NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate() {
        if *v > best_v {
            best = i;
            best_v = *v;
        }
    }
    best
}

/// Greedy action with probability `1 - eps`, uniform random action otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    if u < eps {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub action: usize,
    /// Q-value (DQN) or estimated mean reward (bandits) of the chosen action.
    pub value: f64,
}

/// One component agent under any of the supported policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Agent {
    Dqn(DqnAgent),
    Ucb1(Ucb1),
    Thompson(Thompson),
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, n_actions: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.policy {
            PolicyKind::EpsGreedyDqn => Agent::Dqn(DqnAgent::new(input_dim, n_actions, cfg, rng)?),
            PolicyKind::Ucb1 => Agent::Ucb1(Ucb1::new(n_actions, cfg.ucb_c, cfg.bandit_discount)),
            PolicyKind::Thompson => Agent::Thompson(Thompson::new(n_actions, cfg.obs_var, cfg.bandit_discount)),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            Agent::Dqn(_) => PolicyKind::EpsGreedyDqn,
            Agent::Ucb1(_) => PolicyKind::Ucb1,
            Agent::Thompson(_) => PolicyKind::Thompson,
        }
    }

    /// Exploring selection; `eps` only affects the DQN policy.
    pub fn select<R: Rng + ?Sized>(&self, state: &[f64], eps: f64, rng: &mut R) -> Result<Selection> {
        Ok(match self {
            Agent::Dqn(a) => {
                let q = a.q_values(state)?;
                let action = epsilon_greedy(&q, eps, rng);
                Selection { action, value: q[action] }
            }
            Agent::Ucb1(u) => {
                let action = u.select();
                Selection {
                    action,
                    value: u.stats.mean(action),
                }
            }
            Agent::Thompson(t) => {
                let action = t.select(rng);
                Selection {
                    action,
                    value: t.stats.mean(action),
                }
            }
        })
    }

    /// Exploitation only: argmax Q or argmax estimated mean.
    pub fn greedy(&self, state: &[f64]) -> Result<Selection> {
        let values = match self {
            Agent::Dqn(a) => a.q_values(state)?,
            Agent::Ucb1(u) => u.stats.means(),
            Agent::Thompson(t) => t.stats.means(),
        };
        let action = argmax(&values);
        Ok(Selection {
            action,
            value: values[action],
        })
    }

    /// Immediate reward feedback; bandits update their statistics, the DQN learns from replay instead.
    pub fn observe(&mut self, action: usize, reward: f64) {
        match self {
            Agent::Dqn(_) => {}
            Agent::Ucb1(u) => u.update(action, reward),
            Agent::Thompson(t) => t.update(action, reward),
        }
    }

    pub fn learn(&mut self, batch: &[TdSample<'_>]) -> Result<Option<TdOutcome>> {
        match self {
            Agent::Dqn(a) => a.learn(batch).map(Some),
            _ => Ok(None),
        }
    }

    pub fn uses_replay(&self) -> bool {
        matches!(self, Agent::Dqn(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
        assert_eq!(argmax(&[f64::NAN, 0.5]), 1);
    }

    #[test]
    fn eps_zero_is_greedy() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut rng), 1);
        }
    }

    #[test]
    fn eps_one_is_uniform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let k = 5;
        let n = 10_000;
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            counts[epsilon_greedy(&[0.0, 9.0, 1.0, 2.0, 3.0], 1.0, &mut rng)] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((k - 1) as f64).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2} p {p}");
    }

    #[test]
    fn ucb_agent_tries_unpulled_arm() {
        let cfg = AgentConfig {
            policy: PolicyKind::Ucb1,
            ..AgentConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut agent = Agent::new(4, 3, &cfg, &mut rng).unwrap();
        agent.observe(0, 1.0);
        agent.observe(1, 1.0);
        assert_eq!(agent.select(&[0.0; 4], 0.0, &mut rng).unwrap().action, 2);
        assert!(!agent.uses_replay());
    }
}
