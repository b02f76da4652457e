//! Non-stationary bandit policies over one agent's action space.
//!
//! Both keep discounted sufficient statistics: before every update all counts
//! and reward sums are multiplied by `discount` (1.0 gives the stationary forms).

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::policy::argmax;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    discount: f64,
    /// Discounted pull counts.
    counts: Vec<f64>,
    /// Discounted reward sums.
    sums: Vec<f64>,
    /// Raw (undiscounted) pull counts.
    pulls: Vec<u64>,
}

impl ArmStats {
    pub fn new(arms: usize, discount: f64) -> Self {
        assert!(arms > 0, "need at least one arm");
        assert!(discount > 0.0 && discount <= 1.0, "discount must be in (0, 1]");
        Self {
            discount,
            counts: vec![0.0; arms],
            sums: vec![0.0; arms],
            pulls: vec![0; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.counts.len()
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        if self.discount < 1.0 {
            self.counts.iter_mut().for_each(|c| *c *= self.discount);
            self.sums.iter_mut().for_each(|s| *s *= self.discount);
        }
        self.counts[arm] += 1.0;
        self.sums[arm] += reward;
        self.pulls[arm] += 1;
    }

    pub fn mean(&self, arm: usize) -> f64 {
        if self.counts[arm] > 0.0 {
            self.sums[arm] / self.counts[arm]
        } else {
            0.0
        }
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.arms()).map(|a| self.mean(a)).collect()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn pulls(&self) -> &[u64] {
        &self.pulls
    }

    /// Arm with the highest estimated mean (lowest id on ties).
    pub fn best(&self) -> usize {
        argmax(&self.means())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ucb1 {
    pub c: f64,
    pub stats: ArmStats,
}

impl Ucb1 {
    pub fn new(arms: usize, c: f64, discount: f64) -> Self {
        Self {
            c,
            stats: ArmStats::new(arms, discount),
        }
    }

    /// Unpulled arms first (lowest id), then `argmax(mean + c * sqrt(ln t / n_a))`.
    pub fn select(&self) -> usize {
        if let Some(a) = self.stats.pulls.iter().position(|&n| n == 0) {
            return a;
        }
        let t: f64 = self.stats.counts.iter().sum();
        let ln_t = t.max(1.0).ln();
        let scores: Vec<f64> = (0..self.stats.arms())
            .map(|a| self.stats.mean(a) + self.c * (ln_t / self.stats.counts[a]).sqrt())
            .collect();
        argmax(&scores)
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.stats.update(arm, reward);
    }
}

/// Gaussian Thompson sampling with known observation variance and a Normal prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thompson {
    pub obs_var: f64,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub stats: ArmStats,
}

impl Thompson {
    pub fn new(arms: usize, obs_var: f64, discount: f64) -> Self {
        Self {
            obs_var,
            prior_mean: 0.0,
            prior_var: 100.0,
            stats: ArmStats::new(arms, discount),
        }
    }

    /// Posterior `(mean, variance)` of one arm's expected reward.
    pub fn posterior(&self, arm: usize) -> (f64, f64) {
        let precision = 1.0 / self.prior_var + self.stats.counts[arm] / self.obs_var;
        let mean = (self.prior_mean / self.prior_var + self.stats.sums[arm] / self.obs_var) / precision;
        (mean, 1.0 / precision)
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let samples: Vec<f64> = (0..self.stats.arms())
            .map(|a| {
                let (m, v) = self.posterior(a);
                Normal::new(m, v.sqrt()).expect("posterior variance is positive").sample(rng)
            })
            .collect();
        argmax(&samples)
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.stats.update(arm, reward);
    }
}

/// Sample-mean estimates with epsilon-greedy selection: the bandit form of the
/// DQN agents' exploration rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsGreedyBandit {
    pub stats: ArmStats,
}

impl EpsGreedyBandit {
    pub fn new(arms: usize, discount: f64) -> Self {
        Self {
            stats: ArmStats::new(arms, discount),
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> usize {
        super::policy::epsilon_greedy(&self.stats.means(), eps, rng)
    }

    pub fn update(&mut self, arm: usize, reward: f64) {
        self.stats.update(arm, reward);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn ucb_pulls_unpulled_arm_first() {
        let mut u = Ucb1::new(3, 2f64.sqrt(), 1.0);
        u.update(0, 10.0);
        u.update(2, 10.0);
        assert_eq!(u.select(), 1);
    }

    #[test]
    fn ucb_bonus_prefers_less_pulled_arm_at_equal_means() {
        let mut u = Ucb1::new(2, 2f64.sqrt(), 1.0);
        for _ in 0..10 {
            u.update(0, 0.5);
        }
        u.update(1, 0.5);
        assert_eq!(u.select(), 1);
    }

    #[test]
    fn discounting_forgets() {
        let mut s = ArmStats::new(2, 0.5);
        s.update(0, 1.0);
        s.update(1, 0.0);
        assert_eq!(s.counts(), &[0.5, 1.0]);
        assert_eq!(s.pulls(), &[1, 1]);
        assert_eq!(s.mean(0), 1.0);
    }

    #[test]
    fn thompson_posterior_and_selection() {
        let mut t = Thompson::new(2, 1.0, 1.0);
        for _ in 0..200 {
            t.update(0, 0.0);
            t.update(1, 1.0);
        }
        let (m, v) = t.posterior(1);
        assert!((m - 1.0).abs() < 0.01 && v > 0.0 && v < 0.01);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let picks = (0..100).filter(|_| t.select(&mut rng) == 1).count();
        assert!(picks > 95);
    }
}
