//! Seeded surrogate of a multi-label training run.
//!
//! Validation loss follows
//!
//! ```text
//! L <- max(floor, L * (1 - eta * g(C, phase)) + noise_std * m(C) * L * n)
//! ```
//!
//! where `g` sums the effectiveness of the four chosen strategies in the
//! current phase plus pairwise interaction bonuses, `m(C)` is the product of
//! per-strategy noise multipliers and `n ~ N(0, 1)`. Validation mAP is a
//! logistic function of the loss. Class imbalance only affects the per-class
//! F1 values: class `r` (frequency rank, 1-based) scores
//! `map * (1 - s * (1 - comp(loss)) * (1 - q_r))` with `q_r = exp(-beta (r - 1))`.
//!
//! Every step draws the same three normal variates whatever the configuration,
//! so two policies run on the same seed see paired noise.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Environment, MetricsReport};
use crate::catalog::{Catalog, Component, JointConfig};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

pub const SCHEMA_VERSION: u32 = 1;

/// `exp(-beta * (rank - 1))`, the share of a class's samples kept at frequency rank `rank`.
pub fn retention_fraction(rank: usize, beta: f64) -> f64 {
    (-beta * (rank.max(1) - 1) as f64).exp()
}

/// Loss-to-mAP calibration: two points of the logistic curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub loss_high: f64,
    pub map_low: f64,
    pub loss_low: f64,
    pub map_high: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            loss_high: 1.0,
            map_low: 0.1,
            loss_low: 0.05,
            map_high: 0.95,
        }
    }
}

impl Calibration {
    /// `(a, b)` of `map = 1 / (1 + exp(a * (L - b)))`.
    pub fn coefficients(&self) -> Result<(f64, f64)> {
        let logit = |m: f64| ((1.0 - m) / m).ln();
        if !(self.loss_high > self.loss_low) || !(0.0 < self.map_low && self.map_low < self.map_high && self.map_high < 1.0) {
            return Err(Error::InvalidInput("calibration points must be ordered and maps in (0, 1)".into()));
        }
        let a = (logit(self.map_low) - logit(self.map_high)) / (self.loss_high - self.loss_low);
        let b = self.loss_high - logit(self.map_low) / a;
        Ok((a, b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRef {
    pub component: Component,
    pub name: String,
}

/// Extra progress when both strategies are chosen together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub first: StrategyRef,
    pub second: StrategyRef,
    pub bonus: f64,
}

/// Parameters of the surrogate, loadable from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTrainerSpec {
    pub schema_version: u32,
    pub name: String,
    pub horizon: usize,
    /// Fractions of the horizon where the mid and late phases begin.
    pub phase_boundaries: [f64; 2],
    pub eta: f64,
    pub noise_std: f64,
    pub initial_loss: f64,
    pub loss_floor: f64,
    #[serde(default)]
    pub calibration: Calibration,
    /// `effectiveness[component][strategy] = [early, mid, late]`.
    pub effectiveness: BTreeMap<Component, BTreeMap<String, [f64; 3]>>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    /// Per-strategy noise multipliers (default 1).
    #[serde(default)]
    pub noise_scale: BTreeMap<Component, BTreeMap<String, f64>>,
    /// Natural log of the most-to-least frequent class ratio.
    pub rho: f64,
    /// Retention decay rate; `rho / (n_classes - 1)` when absent.
    #[serde(default)]
    pub beta: Option<f64>,
    pub n_classes: usize,
    pub tail_sensitivity: f64,
    /// Loss strategy -> share of the rare-class deficit it recovers, in [0, 1].
    #[serde(default)]
    pub tail_compensation: BTreeMap<String, f64>,
    /// Augmentation -> training/validation loss ratio (default 1).
    #[serde(default)]
    pub train_loss_ratio: BTreeMap<String, f64>,
    /// Optimizer -> gradient-norm multiplier (default 1).
    #[serde(default)]
    pub grad_scale: BTreeMap<String, f64>,
    /// Optimizer -> relative update magnitude multiplier (default 1).
    #[serde(default)]
    pub step_scale: BTreeMap<String, f64>,
    pub texture_range: [f64; 2],
}

const DEFAULT_SPEC: &str = include_str!("../../data/synthetic_default.json");

impl Default for SyntheticTrainerSpec {
    fn default() -> Self {
        Self::from_json(DEFAULT_SPEC).expect("shipped surrogate spec is valid")
    }
}

impl SyntheticTrainerSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Shipped specs by name: `default`, `rho1`, `rho2`, `rho5`, `rho10`, `deceptive`.
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "default" => DEFAULT_SPEC,
            "rho1" => include_str!("../../data/synthetic_rho1.json"),
            "rho2" => include_str!("../../data/synthetic_rho2.json"),
            "rho5" => include_str!("../../data/synthetic_rho5.json"),
            "rho10" => include_str!("../../data/synthetic_rho10.json"),
            "deceptive" => include_str!("../../data/synthetic_deceptive.json"),
            other => return Err(Error::Usage(format!("unknown surrogate preset {other:?}"))),
        };
        Self::from_json(text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported surrogate schema version {}", self.schema_version));
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1".into());
        }
        let [b1, b2] = self.phase_boundaries;
        if !(0.0 < b1 && b1 < b2 && b2 < 1.0) {
            return bad(format!("phase boundaries {b1}, {b2} must satisfy 0 < b1 < b2 < 1"));
        }
        for (name, v) in [
            ("eta", self.eta),
            ("noise_std", self.noise_std),
            ("initial_loss", self.initial_loss),
            ("loss_floor", self.loss_floor),
            ("rho", self.rho),
            ("tail_sensitivity", self.tail_sensitivity),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.tail_sensitivity > 1.0 {
            return bad("tail_sensitivity must be <= 1".into());
        }
        if self.n_classes < 4 {
            return bad("n_classes must be >= 4".into());
        }
        if let Some(beta) = self.beta {
            if !(beta.is_finite() && beta >= 0.0) {
                return bad(format!("beta = {beta} must be finite and >= 0"));
            }
        }
        let [t0, t1] = self.texture_range;
        if !(0.0 <= t0 && t0 <= t1 && t1 <= 1.0) {
            return bad("texture_range must lie within [0, 1]".into());
        }
        self.calibration.coefficients()?;
        for table in self.effectiveness.values() {
            for (name, e) in table {
                if e.iter().any(|v| !v.is_finite()) {
                    return bad(format!("effectiveness of {name} is not finite"));
                }
            }
        }
        for i in &self.interactions {
            if !i.bonus.is_finite() {
                return bad("interaction bonus is not finite".into());
            }
        }
        for (name, c) in &self.tail_compensation {
            if !(0.0..=1.0).contains(c) {
                return bad(format!("tail compensation of {name} outside [0, 1]"));
            }
        }
        let positive = self
            .train_loss_ratio
            .values()
            .chain(self.grad_scale.values())
            .chain(self.step_scale.values())
            .chain(self.noise_scale.values().flat_map(|t| t.values()));
        for v in positive {
            if !(v.is_finite() && *v >= 0.0) {
                return bad(format!("scale factor {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(self.rho / (self.n_classes - 1) as f64)
    }

    /// Phase index (0 early, 1 mid, 2 late) of decision step `t` (0-based).
    pub fn phase_of(&self, t: usize) -> usize {
        let frac = t as f64 / self.horizon as f64;
        if frac < self.phase_boundaries[0] {
            0
        } else if frac < self.phase_boundaries[1] {
            1
        } else {
            2
        }
    }
}

/// Spec resolved against a catalog into dense lookup tables.
#[derive(Clone, Debug)]
struct Tables {
    /// `eff[k][id][phase]`.
    eff: [Vec<[f64; 3]>; 4],
    /// `(k1, id1, k2, id2, bonus)`.
    pairs: Vec<(usize, usize, usize, usize, f64)>,
    noise: [Vec<f64>; 4],
    comp: Vec<f64>,
    train_ratio: Vec<f64>,
    grad: Vec<f64>,
    step: Vec<f64>,
    /// Per-class retention `q_r`, by rank.
    retention: Vec<f64>,
    logistic: (f64, f64),
}

fn per_strategy(catalog: &Catalog, component: Component, table: &BTreeMap<String, f64>, default: f64) -> Result<Vec<f64>> {
    let space = catalog.space(component);
    for name in table.keys() {
        if !space.contains(name) {
            return Err(Error::InvalidInput(format!("{name:?} is not a {component} strategy")));
        }
    }
    Ok(space
        .strategies()
        .iter()
        .map(|s| table.get(&s.name).copied().unwrap_or(default))
        .collect())
}

impl Tables {
    fn build(spec: &SyntheticTrainerSpec, catalog: &Catalog) -> Result<Self> {
        let mut eff: [Vec<[f64; 3]>; 4] = Default::default();
        let mut noise: [Vec<f64>; 4] = Default::default();
        let empty = BTreeMap::new();
        for comp in Component::ALL {
            let table = spec
                .effectiveness
                .get(&comp)
                .ok_or_else(|| Error::InvalidInput(format!("effectiveness tensor lacks {comp}")))?;
            let space = catalog.space(comp);
            for name in table.keys() {
                if !space.contains(name) {
                    return Err(Error::InvalidInput(format!("{name:?} is not a {comp} strategy")));
                }
            }
            eff[comp.index()] = space
                .strategies()
                .iter()
                .map(|s| {
                    table
                        .get(&s.name)
                        .copied()
                        .ok_or_else(|| Error::InvalidInput(format!("effectiveness tensor lacks {comp}/{}", s.name)))
                })
                .collect::<Result<_>>()?;
            noise[comp.index()] = per_strategy(catalog, comp, spec.noise_scale.get(&comp).unwrap_or(&empty), 1.0)?;
        }
        let resolve = |r: &StrategyRef| -> Result<(usize, usize)> {
            let id = catalog
                .space(r.component)
                .find(&r.name)
                .ok_or_else(|| Error::InvalidInput(format!("{:?} is not a {} strategy", r.name, r.component)))?;
            Ok((r.component.index(), id))
        };
        let mut pairs = Vec::new();
        for i in &spec.interactions {
            let (k1, a) = resolve(&i.first)?;
            let (k2, b) = resolve(&i.second)?;
            if k1 == k2 {
                return Err(Error::InvalidInput("interaction must span two components".into()));
            }
            pairs.push((k1, a, k2, b, i.bonus));
        }
        let beta = spec.beta();
        Ok(Self {
            eff,
            pairs,
            noise,
            comp: per_strategy(catalog, Component::Loss, &spec.tail_compensation, 0.0)?,
            train_ratio: per_strategy(catalog, Component::Aug, &spec.train_loss_ratio, 1.0)?,
            grad: per_strategy(catalog, Component::Opt, &spec.grad_scale, 1.0)?,
            step: per_strategy(catalog, Component::Opt, &spec.step_scale, 1.0)?,
            retention: (1..=spec.n_classes).map(|r| retention_fraction(r, beta)).collect(),
            logistic: spec.calibration.coefficients()?,
        })
    }

    fn gains(&self, c: &JointConfig, phase: usize) -> [f64; 4] {
        let ids = c.as_array();
        let mut g = [0.0; 4];
        for k in 0..4 {
            g[k] = self.eff[k][ids[k]][phase];
        }
        for &(k1, a, k2, b, bonus) in &self.pairs {
            if ids[k1] == a && ids[k2] == b {
                g[k1] += bonus / 2.0;
                g[k2] += bonus / 2.0;
            }
        }
        g
    }

    fn map_of(&self, loss: f64) -> f64 {
        let (a, b) = self.logistic;
        1.0 / (1.0 + (a * (loss - b)).exp())
    }
}

/// Per-class F1 values by frequency rank for a given mAP and loss strategy.
fn class_f1(map: f64, retention: &[f64], sensitivity: f64, compensation: f64) -> Vec<f64> {
    retention
        .iter()
        .map(|q| map * (1.0 - sensitivity * (1.0 - compensation) * (1.0 - q)))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// The surrogate environment.
#[derive(Clone, Debug)]
pub struct SyntheticTrainer {
    spec: SyntheticTrainerSpec,
    tables: Tables,
    rng: Rng,
    t: usize,
    loss: f64,
    texture: f64,
    last_gains: Option<[f64; 4]>,
}

impl SyntheticTrainer {
    pub fn new(spec: SyntheticTrainerSpec, catalog: &Catalog) -> Result<Self> {
        spec.validate()?;
        let tables = Tables::build(&spec, catalog)?;
        let loss = spec.initial_loss;
        Ok(Self {
            spec,
            tables,
            rng: rng::stream(0, rng::ENV),
            t: 0,
            loss,
            texture: 0.5,
            last_gains: None,
        })
    }

    pub fn spec(&self) -> &SyntheticTrainerSpec {
        &self.spec
    }

    /// Decision steps executed in the current episode.
    pub fn step_index(&self) -> usize {
        self.t
    }

    /// Progress rate `g(C, phase)`.
    pub fn progress(&self, c: &JointConfig, phase: usize) -> f64 {
        self.tables.gains(c, phase).iter().sum()
    }

    /// `g` split across the four components; interaction bonuses are shared equally.
    pub fn gains(&self, c: &JointConfig, phase: usize) -> [f64; 4] {
        self.tables.gains(c, phase)
    }

    pub fn map_of_loss(&self, loss: f64) -> f64 {
        self.tables.map_of(loss)
    }

    /// Final noise-free loss of holding `c` for the whole horizon.
    pub fn noiseless_final_loss(&self, c: &JointConfig) -> f64 {
        let mut loss = self.spec.initial_loss;
        for t in 0..self.spec.horizon {
            let g = self.progress(c, self.spec.phase_of(t));
            loss = (loss * (1.0 - self.spec.eta * g)).max(self.spec.loss_floor);
        }
        loss
    }

    fn report(&self, loss_train: f64, grad_norm: f64, rel_update: f64, loss_id: usize) -> MetricsReport {
        let map = self.tables.map_of(self.loss);
        let f1 = class_f1(map, &self.tables.retention, self.spec.tail_sensitivity, self.tables.comp[loss_id]);
        let k = f1.len();
        let q = k / 4;
        let tail = mean(&f1[k - q..]);
        MetricsReport {
            map_val: map,
            rare_f1: tail,
            head_f1: mean(&f1[..q]),
            mid_f1: mean(&f1[q..k - q]),
            tail_f1: tail,
            bacc: mean(&f1),
            loss_train,
            loss_val: self.loss,
            grad_norm,
            rel_update_mag: rel_update,
            texture_richness: self.texture,
            terminal: self.t >= self.spec.horizon,
        }
    }
}

impl Environment for SyntheticTrainer {
    fn reset(&mut self, seed: u64) -> Result<MetricsReport> {
        self.rng = rng::stream(seed, rng::ENV);
        let [lo, hi] = self.spec.texture_range;
        self.texture = lo + (hi - lo) * self.rng.random::<f64>();
        self.t = 0;
        self.loss = self.spec.initial_loss;
        self.last_gains = None;
        let l = self.loss;
        Ok(self.report(l, 0.5 + 2.0 * l, 0.01 * (0.2 + l), 0))
    }

    fn execute(&mut self, c: &JointConfig) -> Result<MetricsReport> {
        if self.t >= self.spec.horizon {
            return Err(Error::Env(format!("episode exhausted after {} steps", self.spec.horizon)));
        }
        let ids = c.as_array();
        for (k, id) in ids.iter().enumerate() {
            if *id >= self.tables.eff[k].len() {
                return Err(Error::OutOfRange {
                    index: *id,
                    size: self.tables.eff[k].len(),
                });
            }
        }
        let n: [f64; 3] = [
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
        ];
        let phase = self.spec.phase_of(self.t);
        let gains = self.tables.gains(c, phase);
        let g: f64 = gains.iter().sum();
        let mult: f64 = (0..4).map(|k| self.tables.noise[k][ids[k]]).product();
        let prev = self.loss;
        self.loss = (prev * (1.0 - self.spec.eta * g) + self.spec.noise_std * mult * prev * n[0]).max(self.spec.loss_floor);
        self.t += 1;
        self.last_gains = Some(gains);

        let [aug, opt, _, loss_id] = ids;
        let loss_train = (self.loss * self.tables.train_ratio[aug] * (1.0 + self.spec.noise_std * n[1])).max(0.0);
        let jitter = (1.0 + 0.1 * n[2]).abs();
        let grad_norm = self.tables.grad[opt] * (0.5 + 2.0 * self.loss) * jitter;
        let rel_update = self.tables.step[opt] * 0.01 * (0.2 + self.loss) * jitter;
        Ok(self.report(loss_train, grad_norm, rel_update, loss_id))
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn component_gains(&self) -> Option<[f64; 4]> {
        self.last_gains
    }
}

/// Result of the brute-force static search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticBest {
    pub config: JointConfig,
    pub mean_final_map: f64,
    /// Mean final mAP of every joint configuration, by joint index.
    pub all: Vec<f64>,
}

/// Final mAP of holding `c` for a whole episode seeded with `seed`.
pub fn static_final_map(env: &mut SyntheticTrainer, c: &JointConfig, seed: u64) -> Result<f64> {
    let mut last = env.reset(seed)?;
    for _ in 0..env.horizon() {
        last = env.execute(c)?;
    }
    Ok(last.map_val)
}

/// Evaluates every joint configuration held fixed for the horizon, averaged
/// over `seeds`, and returns the best (lowest index on ties).
pub fn best_static_config(spec: &SyntheticTrainerSpec, catalog: &Catalog, seeds: &[u64]) -> Result<StaticBest> {
    use rayon::prelude::*;
    if seeds.is_empty() {
        return Err(Error::Usage("best_static_config needs at least one seed".into()));
    }
    let env = SyntheticTrainer::new(spec.clone(), catalog)?;
    let all: Vec<f64> = (0..catalog.joint_size())
        .into_par_iter()
        .map(|i| {
            let mut env = env.clone();
            let c = catalog.index_to_config(i)?;
            let mut total = 0.0;
            for &s in seeds {
                total += static_final_map(&mut env, &c, s)?;
            }
            Ok(total / seeds.len() as f64)
        })
        .collect::<Result<_>>()?;
    let best = crate::qlearn::policy::argmax(&all);
    Ok(StaticBest {
        config: catalog.index_to_config(best)?,
        mean_final_map: all[best],
        all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_default_catalog;

    #[test]
    fn retention_examples() {
        assert_eq!(retention_fraction(1, 0.7), 1.0);
        assert_eq!(retention_fraction(9, 0.0), 1.0);
        assert!((retention_fraction(11, 0.1) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn calibration_points() {
        let (a, b) = Calibration::default().coefficients().unwrap();
        let m = |l: f64| 1.0 / (1.0 + (a * (l - b)).exp());
        assert!((m(1.0) - 0.1).abs() < 1e-12);
        assert!((m(0.05) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn phases() {
        let spec = SyntheticTrainerSpec::default();
        assert_eq!(spec.horizon, 30);
        let phases: Vec<usize> = (0..30).map(|t| spec.phase_of(t)).collect();
        assert_eq!(phases.iter().filter(|p| **p == 0).count(), 9);
        assert_eq!(phases.iter().filter(|p| **p == 2).count(), 9);
    }

    #[test]
    fn exhausted_episode_errors() {
        let cat = build_default_catalog();
        let mut env = SyntheticTrainer::new(SyntheticTrainerSpec::default(), &cat).unwrap();
        env.reset(1).unwrap();
        let c = JointConfig::new(0, 0, 0, 0);
        for t in 0..30 {
            let r = env.execute(&c).unwrap();
            assert_eq!(r.terminal, t == 29);
            r.validate().unwrap();
        }
        assert!(env.execute(&c).is_err());
    }

    #[test]
    fn presets_load() {
        for p in ["default", "rho1", "rho2", "rho5", "rho10", "deceptive"] {
            SyntheticTrainerSpec::preset(p).unwrap();
        }
        assert!(SyntheticTrainerSpec::preset("nope").is_err());
    }
}
