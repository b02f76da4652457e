//! Intrinsic reward from the prediction error of a learned forward model.
//!
//! The model maps the extended state and one-hot joint action to the next raw
//! (unnormalized) training-state features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::JointConfig;
use crate::error::{Error, Result};
use crate::qlearn::Mlp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuriosityConfig {
    pub enabled: bool,
    pub lambda_i: f64,
    pub lambda_e: f64,
    /// Forward-model learning rate.
    pub lr: f64,
    pub hidden: Vec<usize>,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda_i: 0.1,
            lambda_e: 1.0,
            lr: 1e-3,
            hidden: vec![64, 64],
        }
    }
}

impl CuriosityConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_i", self.lambda_i), ("lambda_e", self.lambda_e), ("lr", self.lr)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// `lambda_e * r_ext + r_int` when enabled, `lambda_e * r_ext` otherwise.
pub fn combine(r_ext: f64, r_int: f64, cfg: &CuriosityConfig) -> f64 {
    if cfg.enabled {
        cfg.lambda_e * r_ext + r_int
    } else {
        cfg.lambda_e * r_ext
    }
}

pub fn mean_squared_error(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardModel {
    net: Mlp,
    state_dim: usize,
    action_sizes: [usize; 4],
}

impl ForwardModel {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_sizes: [usize; 4], out_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![state_dim + action_sizes.iter().sum::<usize>()];
        sizes.extend_from_slice(hidden);
        sizes.push(out_dim);
        Ok(Self {
            net: Mlp::new(&sizes, rng)?,
            state_dim,
            action_sizes,
        })
    }

    pub fn from_network(net: Mlp, state_dim: usize, action_sizes: [usize; 4]) -> Result<Self> {
        let expected = state_dim + action_sizes.iter().sum::<usize>();
        if net.input_dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: net.input_dim(),
            });
        }
        Ok(Self {
            net,
            state_dim,
            action_sizes,
        })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// State features followed by one one-hot block per component.
    pub fn input(&self, state: &[f64], c: &JointConfig) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim,
                got: state.len(),
            });
        }
        let mut x = state.to_vec();
        for (id, m) in c.as_array().iter().zip(self.action_sizes) {
            if *id >= m {
                return Err(Error::OutOfRange { index: *id, size: m });
            }
            x.extend((0..m).map(|j| if j == *id { 1.0 } else { 0.0 }));
        }
        Ok(x)
    }

    pub fn predict(&self, state: &[f64], c: &JointConfig) -> Result<Vec<f64>> {
        self.net.forward(&self.input(state, c)?)
    }

    /// Unweighted mean squared prediction error.
    pub fn error(&self, state: &[f64], c: &JointConfig, next: &[f64]) -> Result<f64> {
        let pred = self.predict(state, c)?;
        if pred.len() != next.len() {
            return Err(Error::DimensionMismatch {
                expected: pred.len(),
                got: next.len(),
            });
        }
        Ok(mean_squared_error(&pred, next))
    }

    /// Gradient of the mean squared error with respect to every parameter.
    pub fn error_gradient(&self, state: &[f64], c: &JointConfig, next: &[f64]) -> Result<(f64, Mlp)> {
        let trace = self.net.forward_trace(&self.input(state, c)?)?;
        let pred = trace.output();
        if pred.len() != next.len() {
            return Err(Error::DimensionMismatch {
                expected: pred.len(),
                got: next.len(),
            });
        }
        let n = pred.len() as f64;
        let out_grad: Vec<f64> = pred.iter().zip(next).map(|(p, t)| 2.0 * (p - t) / n).collect();
        let mut grads = self.net.zeros_like();
        self.net.backward(&trace, &out_grad, &mut grads);
        Ok((mean_squared_error(pred, next), grads))
    }
}

/// `lambda_i * MSE(prediction, next)`.
pub fn intrinsic_reward(model: &ForwardModel, state: &[f64], c: &JointConfig, next: &[f64], lambda_i: f64) -> Result<f64> {
    Ok(lambda_i * model.error(state, c, next)?)
}

/// One gradient-descent step on the squared prediction error; returns the error
/// before the step. Non-finite gradients leave the model unchanged.
pub fn update_forward_model(model: &mut ForwardModel, state: &[f64], c: &JointConfig, next: &[f64], lr: f64) -> Result<f64> {
    let (err, grads) = model.error_gradient(state, c, next)?;
    if grads.is_finite() {
        if lr != 0.0 {
            model.net.add_scaled(&grads, -lr);
        }
    } else {
        log::warn!("non-finite forward-model gradient; update skipped");
    }
    Ok(err)
}
