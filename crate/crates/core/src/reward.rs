//! Composite extrinsic reward.
//!
//! `R = w_map * f(dmAP) + w_stab * stability + w_conv * convergence - w_pen * penalty`
//! with the shaping `f(x) = x + kappa * max(0, x - tau)`.

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, JointConfig};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    pub w_map: f64,
    pub w_stab: f64,
    pub w_conv: f64,
    pub w_pen: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_map: 1.0,
            w_stab: 1.0,
            w_conv: 0.8,
            w_pen: 0.2,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_map, self.w_stab, self.w_conv, self.w_pen];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("reward weights must be >= 0: {self:?}")))
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_map: self.w_map * k,
            w_stab: self.w_stab * k,
            w_conv: self.w_conv * k,
            w_pen: self.w_pen * k,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapingParams {
    pub kappa: f64,
    pub tau: f64,
}

impl Default for ShapingParams {
    fn default() -> Self {
        Self { kappa: 2.0, tau: 0.005 }
    }
}

/// Everything the reward calculator needs besides the per-step inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub weights: RewardWeights,
    pub shaping: ShapingParams,
    /// `c_s` in the stability term.
    pub stability_coef: f64,
    /// Number of recent validation losses in the stability window.
    pub window: usize,
    /// Validation-loss increase above which a step counts as a spike.
    pub spike_threshold: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            weights: RewardWeights::default(),
            shaping: ShapingParams::default(),
            stability_coef: 10.0,
            window: 5,
            spike_threshold: 0.5,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.shaping.kappa >= 0.0 && self.shaping.tau >= 0.0) {
            return Err(Error::InvalidInput("kappa and tau must be >= 0".into()));
        }
        if !(self.stability_coef > 0.0) {
            return Err(Error::InvalidInput("stability coefficient must be > 0".into()));
        }
        if self.window < 2 {
            return Err(Error::InvalidInput("stability window must hold at least 2 losses".into()));
        }
        Ok(())
    }
}

/// Unweighted reward components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub shaped_map_gain: f64,
    pub stability: f64,
    pub convergence: f64,
    pub penalty: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub shaped_map_gain: f64,
    pub stability: f64,
    pub convergence: f64,
    pub penalty: f64,
    pub total: f64,
}

pub fn shape_map_delta(delta_map: f64, p: &ShapingParams) -> f64 {
    delta_map + p.kappa * (delta_map - p.tau).max(0.0)
}

/// `1 / (1 + c_s * sample_std(window))`; windows shorter than two give 1.
pub fn stability(loss_window: &[f64], c_s: f64) -> f64 {
    let n = loss_window.len();
    if n < 2 {
        return 1.0;
    }
    let mean = loss_window.iter().sum::<f64>() / n as f64;
    let var = loss_window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    1.0 / (1.0 + c_s * var.sqrt())
}

/// Relative loss reduction, clamped to `[-1, 1]`.
pub fn convergence(loss_prev: f64, loss_cur: f64) -> f64 {
    ((loss_prev - loss_cur) / loss_prev.max(1e-8)).clamp(-1.0, 1.0)
}

/// Sum of strategy costs plus 1.0 when the step produced a loss spike.
pub fn penalty(c: &JointConfig, spike: bool, catalog: &Catalog) -> f64 {
    catalog.cost(c) + if spike { 1.0 } else { 0.0 }
}

pub fn composite(b: &RewardComponents, w: &RewardWeights) -> RewardBreakdown {
    let total = w.w_map * b.shaped_map_gain + w.w_stab * b.stability + w.w_conv * b.convergence
        - w.w_pen * b.penalty;
    RewardBreakdown {
        shaped_map_gain: b.shaped_map_gain,
        stability: b.stability,
        convergence: b.convergence,
        penalty: b.penalty,
        total,
    }
}

/// Per-step reward calculator; keeps the recent validation losses for the stability window.
#[derive(Clone, Debug)]
pub struct RewardCalculator {
    params: RewardParams,
    losses: Vec<f64>,
}

/// Metrics of two consecutive observations the calculator compares.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    pub map_prev: f64,
    pub map_cur: f64,
    pub loss_prev: f64,
    pub loss_cur: f64,
}

impl RewardCalculator {
    pub fn new(params: RewardParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            losses: Vec::new(),
        })
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    /// Starts a new episode seeded with the initial validation loss.
    pub fn reset(&mut self, initial_loss: f64) {
        self.losses.clear();
        self.losses.push(initial_loss);
    }

    pub fn components(&mut self, o: &StepOutcome, c: &JointConfig, catalog: &Catalog) -> RewardComponents {
        self.losses.push(o.loss_cur);
        if self.losses.len() > self.params.window {
            let drop = self.losses.len() - self.params.window;
            self.losses.drain(..drop);
        }
        let spike = o.loss_cur - o.loss_prev > self.params.spike_threshold;
        RewardComponents {
            shaped_map_gain: shape_map_delta(o.map_cur - o.map_prev, &self.params.shaping),
            stability: stability(&self.losses, self.params.stability_coef),
            convergence: convergence(o.loss_prev, o.loss_cur),
            penalty: penalty(c, spike, catalog),
        }
    }

    pub fn evaluate(&mut self, o: &StepOutcome, c: &JointConfig, catalog: &Catalog) -> RewardBreakdown {
        let comps = self.components(o, c, catalog);
        composite(&comps, &self.params.weights)
    }
}
