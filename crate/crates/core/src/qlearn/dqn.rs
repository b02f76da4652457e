//! Q-network agent with a periodically synchronized target copy.
//!
//! Updates follow plain semi-gradient TD(0):
//! `theta <- theta + alpha * (y - Q(I, a)) * grad Q(I, a)` with
//! `y = r + gamma * max_a' Q_target(I', a')` (or `y = r` on terminal transitions).
//! Minibatch updates average the per-sample parameter deltas.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PolicyKind {
    #[default]
    #[serde(rename = "eps_greedy_dqn", alias = "EpsGreedyDQN")]
    EpsGreedyDqn,
    #[serde(rename = "ucb1", alias = "UCB1")]
    Ucb1,
    #[serde(rename = "thompson", alias = "Thompson")]
    Thompson,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::EpsGreedyDqn, PolicyKind::Ucb1, PolicyKind::Thompson];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::EpsGreedyDqn => "eps_greedy_dqn",
            PolicyKind::Ucb1 => "ucb1",
            PolicyKind::Thompson => "thompson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "eps_greedy_dqn" | "epsgreedydqn" | "dqn" | "eps_greedy" => Ok(PolicyKind::EpsGreedyDqn),
            "ucb1" | "ucb" => Ok(PolicyKind::Ucb1),
            "thompson" => Ok(PolicyKind::Thompson),
            _ => Err(Error::InvalidInput(format!("unknown policy `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub sync_interval: u64,
    pub minibatch: usize,
    pub policy: PolicyKind,
    pub hidden: Vec<usize>,
    pub ucb_c: f64,
    pub bandit_discount: f64,
    pub obs_var: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            gamma: 0.95,
            sync_interval: 1000,
            minibatch: 32,
            policy: PolicyKind::EpsGreedyDqn,
            hidden: vec![64, 64],
            ucb_c: std::f64::consts::SQRT_2,
            bandit_discount: 0.99,
            obs_var: 1.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput("alpha must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidInput(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if self.sync_interval == 0 || self.minibatch == 0 {
            return Err(Error::InvalidInput("sync_interval and minibatch must be >= 1".into()));
        }
        if !(self.bandit_discount > 0.0 && self.bandit_discount <= 1.0) || !(self.obs_var > 0.0) {
            return Err(Error::InvalidInput("bandit discount in (0, 1] and obs_var > 0 required".into()));
        }
        Ok(())
    }
}

/// Frozen copy of a Q-network; parameters change only in [`sync_target`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetNetwork {
    net: Mlp,
    last_sync_step: u64,
    syncs: u64,
}

impl TargetNetwork {
    pub fn new(source: &Mlp) -> Self {
        Self {
            net: source.clone(),
            last_sync_step: 0,
            syncs: 0,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn last_sync_step(&self) -> u64 {
        self.last_sync_step
    }

    pub fn syncs(&self) -> u64 {
        self.syncs
    }
}

pub fn q_forward(net: &Mlp, state: &[f64]) -> Result<Vec<f64>> {
    net.forward(state)
}

pub fn td_target(reward: f64, gamma: f64, q_next: &[f64], terminal: bool) -> f64 {
    if terminal || q_next.is_empty() {
        reward
    } else {
        reward + gamma * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn sync_target(net: &Mlp, target: &mut TargetNetwork, step: u64) {
    target.net.clone_from(net);
    target.last_sync_step = step;
    target.syncs += 1;
}

/// One agent's view of a stored transition.
#[derive(Clone, Copy, Debug)]
pub struct TdSample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub reward: f64,
    pub next_state: &'a [f64],
    pub terminal: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdOutcome {
    /// Mean TD error over the batch (the single error for one sample).
    pub delta: f64,
    pub mean_abs_delta: f64,
    /// False when the gradient was non-finite and no parameters changed.
    pub applied: bool,
}

/// Accumulates `delta * grad Q(I, a)` for one sample into `grads`, returning `delta`.
fn accumulate(net: &Mlp, target: &TargetNetwork, s: &TdSample<'_>, gamma: f64, grads: &mut Mlp) -> Result<f64> {
    let n_actions = net.output_dim();
    if s.action >= n_actions {
        return Err(Error::OutOfRange {
            index: s.action,
            size: n_actions,
        });
    }
    let q_next = if s.terminal {
        Vec::new()
    } else {
        target.net.forward(s.next_state)?
    };
    let y = td_target(s.reward, gamma, &q_next, s.terminal);
    let trace = net.forward_trace(s.state)?;
    let delta = y - trace.output()[s.action];
    let mut out_grad = vec![0.0; n_actions];
    out_grad[s.action] = delta;
    net.backward(&trace, &out_grad, grads);
    Ok(delta)
}

/// Minibatch TD update with the averaged parameter delta.
pub fn td_update_batch(
    net: &mut Mlp,
    target: &TargetNetwork,
    batch: &[TdSample<'_>],
    alpha: f64,
    gamma: f64,
) -> Result<TdOutcome> {
    if batch.is_empty() {
        return Ok(TdOutcome {
            delta: 0.0,
            mean_abs_delta: 0.0,
            applied: false,
        });
    }
    let mut grads = net.zeros_like();
    let mut sum = 0.0;
    let mut sum_abs = 0.0;
    for s in batch {
        let d = accumulate(net, target, s, gamma, &mut grads)?;
        sum += d;
        sum_abs += d.abs();
    }
    let n = batch.len() as f64;
    let applied = grads.is_finite() && sum.is_finite();
    if applied {
        net.add_scaled(&grads, alpha / n);
    } else {
        log::warn!("non-finite TD gradient; update skipped");
    }
    Ok(TdOutcome {
        delta: sum / n,
        mean_abs_delta: sum_abs / n,
        applied,
    })
}

/// Single-transition update; returns the TD error.
pub fn td_update(net: &mut Mlp, target: &TargetNetwork, sample: &TdSample<'_>, cfg: &AgentConfig) -> Result<TdOutcome> {
    td_update_batch(net, target, std::slice::from_ref(sample), cfg.alpha, cfg.gamma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqnAgent {
    q: Mlp,
    target: TargetNetwork,
    alpha: f64,
    gamma: f64,
    sync_interval: u64,
    updates: u64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, n_actions: usize, cfg: &AgentConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(&cfg.hidden);
        sizes.push(n_actions);
        let q = Mlp::new(&sizes, rng)?;
        let target = TargetNetwork::new(&q);
        Ok(Self {
            q,
            target,
            alpha: cfg.alpha,
            gamma: cfg.gamma,
            sync_interval: cfg.sync_interval,
            updates: 0,
        })
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        q_forward(&self.q, state)
    }

    pub fn network(&self) -> &Mlp {
        &self.q
    }

    pub fn target(&self) -> &TargetNetwork {
        &self.target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One minibatch update, then a target sync every `sync_interval` updates.
    pub fn learn(&mut self, batch: &[TdSample<'_>]) -> Result<TdOutcome> {
        let out = td_update_batch(&mut self.q, &self.target, batch, self.alpha, self.gamma)?;
        self.updates += 1;
        if self.updates % self.sync_interval == 0 {
            sync_target(&self.q, &mut self.target, self.updates);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(1.5, 0.0, &[3.0, 4.0], false), 1.5);
        assert_eq!(td_target(1.0, 0.9, &[0.5, 2.0, -1.0], false), 1.0 + 0.9 * 2.0);
        assert!((td_target(1.0, 0.9, &[0.5, 2.0, -1.0], false) - 2.8).abs() < 1e-15);
        assert_eq!(td_target(0.7, 0.9, &[100.0], true), 0.7);
    }

    #[test]
    fn zero_delta_leaves_parameters() {
        let mut net = Mlp::zeros(&[2, 3]).unwrap();
        let target = TargetNetwork::new(&net);
        let s = [1.0, 2.0];
        let sample = TdSample {
            state: &s,
            action: 1,
            reward: 0.0,
            next_state: &s,
            terminal: true,
        };
        let before = net.clone();
        let out = td_update(&mut net, &target, &sample, &AgentConfig::default()).unwrap();
        assert_eq!(out.delta, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn single_weight_closed_form() {
        // Q = w * x + b with x = 2, w = 1, b = 0 gives Q = 2; a terminal target y = 3 gives delta = 1.
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.layers_mut()[0].weights[0] = 1.0;
        let target = TargetNetwork::new(&net);
        let x = [2.0];
        let sample = TdSample {
            state: &x,
            action: 0,
            reward: 3.0,
            next_state: &x,
            terminal: true,
        };
        let alpha = 0.01;
        let cfg = AgentConfig {
            alpha,
            ..AgentConfig::default()
        };
        let out = td_update(&mut net, &target, &sample, &cfg).unwrap();
        assert_eq!(out.delta, 1.0);
        // grad wrt w is x = 2, grad wrt b is 1.
        assert!((net.layers()[0].weights[0] - (1.0 + alpha * 2.0)).abs() < 1e-15);
        assert!((net.layers()[0].bias[0] - alpha).abs() < 1e-15);
    }

    #[test]
    fn positive_delta_increases_q() {
        let mut r = rng(4);
        for _ in 0..20 {
            let mut net = Mlp::new(&[6, 16, 16, 4], &mut r).unwrap();
            let target = TargetNetwork::new(&net);
            let s: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let a = r.random_range(0..4);
            let before = net.forward(&s).unwrap()[a];
            let sample = TdSample {
                state: &s,
                action: a,
                reward: before + 1.0,
                next_state: &s,
                terminal: true,
            };
            let cfg = AgentConfig {
                alpha: 1e-3,
                ..AgentConfig::default()
            };
            let out = td_update(&mut net, &target, &sample, &cfg).unwrap();
            assert!(out.delta > 0.0);
            assert!(net.forward(&s).unwrap()[a] > before);
        }
    }

    #[test]
    fn target_frozen_between_syncs() {
        let mut r = rng(8);
        let cfg = AgentConfig {
            sync_interval: 1000,
            alpha: 0.01,
            ..AgentConfig::default()
        };
        let mut agent = DqnAgent::new(4, 3, &cfg, &mut r).unwrap();
        let probe = [0.3, -0.2, 0.9, 0.1];
        let frozen: Vec<u64> = agent.target().net().forward(&probe).unwrap().iter().map(|v| v.to_bits()).collect();
        for i in 0..100 {
            let s = [i as f64 * 0.01, 0.5, -0.5, 1.0];
            let sample = TdSample {
                state: &s,
                action: i % 3,
                reward: 1.0,
                next_state: &probe,
                terminal: false,
            };
            agent.learn(&[sample]).unwrap();
            let now: Vec<u64> = agent.target().net().forward(&probe).unwrap().iter().map(|v| v.to_bits()).collect();
            assert_eq!(now, frozen);
        }
        assert_ne!(agent.network(), agent.target().net());
        assert_eq!(agent.target().syncs(), 0);
    }

    #[test]
    fn sync_copies_and_counts() {
        let mut r = rng(2);
        let net = Mlp::new(&[3, 8, 2], &mut r).unwrap();
        let other = Mlp::new(&[3, 8, 2], &mut r).unwrap();
        let mut target = TargetNetwork::new(&other);
        sync_target(&net, &mut target, 17);
        assert_eq!(target.syncs(), 1);
        assert_eq!(target.last_sync_step(), 17);
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
            assert_eq!(net.forward(&x).unwrap(), target.net().forward(&x).unwrap());
        }
    }

    #[test]
    fn periodic_sync() {
        let mut r = rng(6);
        let cfg = AgentConfig {
            sync_interval: 10,
            ..AgentConfig::default()
        };
        let mut agent = DqnAgent::new(2, 2, &cfg, &mut r).unwrap();
        let s = [0.1, 0.2];
        let sample = TdSample {
            state: &s,
            action: 0,
            reward: 1.0,
            next_state: &s,
            terminal: false,
        };
        for _ in 0..25 {
            agent.learn(&[sample]).unwrap();
        }
        assert_eq!(agent.target().syncs(), 2);
        assert_eq!(agent.target().last_sync_step(), 20);
    }

    #[test]
    fn non_finite_update_skipped() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        let target = TargetNetwork::new(&net);
        let x = [1.0];
        let sample = TdSample {
            state: &x,
            action: 0,
            reward: f64::INFINITY,
            next_state: &x,
            terminal: true,
        };
        let before = net.clone();
        let out = td_update(&mut net, &target, &sample, &AgentConfig::default()).unwrap();
        assert!(!out.applied);
        assert_eq!(net, before);
    }

    #[test]
    fn config_validation() {
        let bad = AgentConfig {
            gamma: 1.0,
            ..AgentConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(PolicyKind::parse("UCB1").unwrap(), PolicyKind::Ucb1);
        assert_eq!(PolicyKind::parse("EpsGreedyDQN").unwrap(), PolicyKind::EpsGreedyDqn);
    }
}
