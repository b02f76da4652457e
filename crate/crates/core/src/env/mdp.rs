//! Finite MDP with known dynamics and its value-iteration solution.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transitions[s][a][s']`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][a]`, the expected immediate reward.
    pub rewards: Vec<Vec<f64>>,
    pub gamma: f64,
}

impl TabularMdp {
    pub fn new(transitions: Vec<Vec<Vec<f64>>>, rewards: Vec<Vec<f64>>, gamma: f64) -> Result<Self> {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            gamma,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mdp: Self = serde_json::from_str(text)?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states == 0 || self.n_actions == 0 {
            return Err(Error::InvalidInput("MDP needs at least one state and action".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if self.transitions.len() != self.n_states || self.rewards.len() != self.n_states {
            return Err(Error::InvalidInput("transition/reward tables have the wrong state count".into()));
        }
        for s in 0..self.n_states {
            if self.transitions[s].len() != self.n_actions || self.rewards[s].len() != self.n_actions {
                return Err(Error::InvalidInput(format!("state {s} has the wrong action count")));
            }
            for a in 0..self.n_actions {
                let row = &self.transitions[s][a];
                if row.len() != self.n_states {
                    return Err(Error::InvalidInput(format!("P[{s}][{a}] has the wrong length")));
                }
                if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::InvalidInput(format!("P[{s}][{a}] has a negative entry")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::InvalidInput(format!("P[{s}][{a}] sums to {total}, not 1")));
                }
                if !self.rewards[s][a].is_finite() {
                    return Err(Error::InvalidInput(format!("R[{s}][{a}] is not finite")));
                }
            }
        }
        Ok(())
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (next, p) in self.transitions[s][a].iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        self.n_states - 1
    }

    /// One Bellman optimality backup of `q`.
    pub fn bellman_backup(&self, q: &QTable) -> QTable {
        let v: Vec<f64> = (0..self.n_states).map(|s| q.max(s)).collect();
        let mut out = QTable::zeros(self.n_states, self.n_actions);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let expected: f64 = self.transitions[s][a].iter().zip(&v).map(|(p, v)| p * v).sum();
                out.set(s, a, self.rewards[s][a] + self.gamma * expected);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub q: QTable,
    /// Sup-norm change of each sweep.
    pub deltas: Vec<f64>,
}

/// Iterates `Q <- R + gamma * P max Q` from zero until the sup-norm change is below `tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<ValueIteration> {
    mdp.validate()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be > 0".into()));
    }
    let mut q = QTable::zeros(mdp.n_states, mdp.n_actions);
    let mut deltas = Vec::new();
    loop {
        let next = mdp.bellman_backup(&q);
        let delta = next.sup_distance(&q);
        q = next;
        deltas.push(delta);
        if delta < tol {
            break;
        }
    }
    Ok(ValueIteration { q, deltas })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state(gamma: f64) -> TabularMdp {
        TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]], gamma).unwrap()
    }

    #[test]
    fn zero_reward_gives_zero() {
        let p = vec![vec![vec![0.5, 0.5]; 2]; 2];
        let mdp = TabularMdp::new(p, vec![vec![0.0; 2]; 2], 0.9).unwrap();
        let vi = value_iteration(&mdp, 1e-12).unwrap();
        assert!(vi.q.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn geometric_series() {
        let vi = value_iteration(&one_state(0.9), 1e-12).unwrap();
        assert!((vi.q.get(0, 0) - 10.0).abs() < 1e-10);
    }

    #[test]
    fn non_stochastic_rejected() {
        let p = vec![vec![vec![0.5, 0.6]], vec![vec![0.5, 0.5]]];
        assert!(TabularMdp::new(p, vec![vec![0.0], vec![0.0]], 0.9).is_err());
        assert!(TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![0.0]], 1.0).is_err());
    }

    #[test]
    fn contraction() {
        let p = vec![
            vec![vec![0.2, 0.8], vec![0.9, 0.1]],
            vec![vec![0.5, 0.5], vec![0.0, 1.0]],
        ];
        let mdp = TabularMdp::new(p, vec![vec![1.0, 0.0], vec![0.3, 2.0]], 0.8).unwrap();
        let vi = value_iteration(&mdp, 1e-10).unwrap();
        for w in vi.deltas.windows(2) {
            assert!(w[1] <= 0.8 * w[0] + 1e-12);
        }
    }
}
