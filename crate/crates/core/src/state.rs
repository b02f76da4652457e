//! Instantaneous training state and the extended state the agents condition on.
//!
//! The extended state concatenates three normalized blocks of the same eight
//! features: the current values, a fast EMA and a slow EMA of the raw values.
//! Each of the 24 entries has its own running mean/std (Welford) and is clipped
//! to `[-5, 5]` after normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order of the raw features inside every block of the extended state.
pub const FEATURE_NAMES: [&str; 8] = [
    "map_val",
    "loss_train",
    "loss_val",
    "delta_loss_val",
    "grad_norm",
    "rel_update_mag",
    "texture_richness",
    "epoch_frac",
];

pub const RAW_DIM: usize = FEATURE_NAMES.len();
pub const EXTENDED_DIM: usize = 3 * RAW_DIM;

const STD_FLOOR: f64 = 1e-6;
const CLIP: f64 = 5.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub map_val: f64,
    pub loss_train: f64,
    pub loss_val: f64,
    /// Previous minus current validation loss (positive when improving).
    pub delta_loss_val: f64,
    pub grad_norm: f64,
    pub rel_update_mag: f64,
    pub texture_richness: f64,
    pub epoch_frac: f64,
}

impl TrainingState {
    pub fn to_array(&self) -> [f64; RAW_DIM] {
        [
            self.map_val,
            self.loss_train,
            self.loss_val,
            self.delta_loss_val,
            self.grad_norm,
            self.rel_update_mag,
            self.texture_richness,
            self.epoch_frac,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let values = self.to_array();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite {}", FEATURE_NAMES[i])));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("map_val", self.map_val)?;
        unit("texture_richness", self.texture_richness)?;
        unit("epoch_frac", self.epoch_frac)?;
        for (name, v) in [
            ("loss_train", self.loss_train),
            ("loss_val", self.loss_val),
            ("grad_norm", self.grad_norm),
            ("rel_update_mag", self.rel_update_mag),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }
}

/// Fast and slow EMA coefficients, `0 < slow < fast <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaPair {
    pub fast: f64,
    pub slow: f64,
}

impl EmaPair {
    pub fn new(fast: f64, slow: f64) -> Result<Self> {
        let pair = Self { fast, slow };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.slow && self.slow < self.fast && self.fast <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "EMA rates need 0 < slow < fast <= 1, got fast={} slow={}",
                self.fast, self.slow
            )))
        }
    }
}

impl Default for EmaPair {
    fn default() -> Self {
        Self { fast: 0.3, slow: 0.05 }
    }
}

/// `(1 - alpha) * prev + alpha * x`.
pub fn ema_update(prev: f64, x: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("EMA coefficient {alpha} outside (0, 1]")));
    }
    Ok((1.0 - alpha) * prev + alpha * x)
}

/// Welford running mean and sample variance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).sqrt()
        }
    }
}

/// `(x - mean) / max(std, 1e-6)`, clipped to `[-5, 5]`.
pub fn normalize(x: f64, stats: &RunningStats) -> f64 {
    ((x - stats.mean()) / stats.std().max(STD_FLOOR)).clamp(-CLIP, CLIP)
}

/// Fixed-length feature vector fed to the Q-networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub features: Vec<f64>,
}

impl ExtendedState {
    pub fn zeros() -> Self {
        Self {
            features: vec![0.0; EXTENDED_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Short hex digest of the exact feature bits, for decision logs.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for f in &self.features {
            hasher.update(f.to_le_bytes());
        }
        hex::encode(hasher.finalize())[..16].to_string()
    }
}

/// Owns the EMA history and the per-feature running statistics for one run.
#[derive(Clone, Debug)]
pub struct StateBuilder {
    ema: EmaPair,
    fast: Option<[f64; RAW_DIM]>,
    slow: Option<[f64; RAW_DIM]>,
    stats: Vec<RunningStats>,
}

impl StateBuilder {
    pub fn new(ema: EmaPair) -> Result<Self> {
        ema.validate()?;
        Ok(Self {
            ema,
            fast: None,
            slow: None,
            stats: vec![RunningStats::default(); EXTENDED_DIM],
        })
    }

    /// Forgets the EMA history (start of a new episode); normalization statistics persist.
    pub fn reset_history(&mut self) {
        self.fast = None;
        self.slow = None;
    }

    pub fn extend(&mut self, s: &TrainingState) -> Result<ExtendedState> {
        s.validate()?;
        let current = s.to_array();
        let fast = match self.fast {
            None => current,
            Some(prev) => blend(&prev, &current, self.ema.fast)?,
        };
        let slow = match self.slow {
            None => current,
            Some(prev) => blend(&prev, &current, self.ema.slow)?,
        };
        self.fast = Some(fast);
        self.slow = Some(slow);

        let mut features = Vec::with_capacity(EXTENDED_DIM);
        for (block, raw) in [current, fast, slow].iter().enumerate() {
            for (i, x) in raw.iter().enumerate() {
                let stats = &mut self.stats[block * RAW_DIM + i];
                stats.push(*x);
                features.push(normalize(*x, stats));
            }
        }
        Ok(ExtendedState { features })
    }

    pub fn fast_ema(&self) -> Option<[f64; RAW_DIM]> {
        self.fast
    }

    pub fn slow_ema(&self) -> Option<[f64; RAW_DIM]> {
        self.slow
    }

    /// Names of the 24 extended-state entries in order.
    pub fn manifest() -> Vec<String> {
        ["current", "ema_fast", "ema_slow"]
            .iter()
            .flat_map(|block| FEATURE_NAMES.iter().map(move |f| format!("{block}.{f}")))
            .collect()
    }
}

fn blend(prev: &[f64; RAW_DIM], x: &[f64; RAW_DIM], alpha: f64) -> Result<[f64; RAW_DIM]> {
    let mut out = [0.0; RAW_DIM];
    for i in 0..RAW_DIM {
        out[i] = ema_update(prev[i], x[i], alpha)?;
    }
    Ok(out)
}
