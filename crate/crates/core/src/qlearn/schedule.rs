use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponential decay of the exploration rate from `eps_start` to `eps_end` over
/// `horizon` decision steps, constant afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub horizon: u64,
}

impl ExplorationSchedule {
    pub fn new(eps_start: f64, eps_end: f64, horizon: u64) -> Result<Self> {
        let s = Self {
            eps_start,
            eps_end,
            horizon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "exploration needs 0 < eps_end <= eps_start <= 1, got {} -> {}",
                self.eps_start, self.eps_end
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("exploration horizon must be >= 1".into()));
        }
        Ok(())
    }

    /// `eps_start * (eps_end / eps_start)^(min(t, T) / T)`.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t == 0 {
            return self.eps_start;
        }
        if t >= self.horizon {
            return self.eps_end;
        }
        let frac = t as f64 / self.horizon as f64;
        self.eps_start * (self.eps_end / self.eps_start).powf(frac)
    }
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_end: 0.1,
            horizon: 1000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = ExplorationSchedule::new(1.0, 0.1, 1000).unwrap();
        assert_eq!(s.epsilon_at(0), 1.0);
        assert_eq!(s.epsilon_at(1000), 0.1);
        assert_eq!(s.epsilon_at(5000), 0.1);
        assert!((s.epsilon_at(500) - 0.1f64.sqrt()).abs() < 1e-12);
        assert!((s.epsilon_at(500) - 0.3162).abs() < 1e-4);
    }

    #[test]
    fn monotone_non_increasing() {
        let s = ExplorationSchedule::new(1.0, 0.1, 777).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..2000 {
            let e = s.epsilon_at(t);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn invalid_rejected() {
        assert!(ExplorationSchedule::new(0.1, 1.0, 10).is_err());
        assert!(ExplorationSchedule::new(1.0, 0.1, 0).is_err());
    }
}
