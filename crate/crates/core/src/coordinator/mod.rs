//! The closed loop: perceive, decide, execute, evaluate, learn.
//!
//! A [`Controller`] owns the four agents, the state builder, the reward
//! calculator, the optional forward model and the shared replay buffer. These
//! persist across episodes, so a run may train for several episodes and then
//! play one exploitation-only episode.

pub mod report;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Component, JointConfig};
use crate::config::RunConfig;
use crate::curiosity::{combine, update_forward_model, ForwardModel};
use crate::env::{Environment, MetricsReport};
use crate::error::{Error, Result};
use crate::qlearn::{Agent, ExplorationSchedule, TdSample};
use crate::replay::{ReplayBuffer, Transition};
use crate::reward::{RewardBreakdown, RewardCalculator, StepOutcome};
use crate::rng::{self, Rng};
use crate::state::{StateBuilder, TrainingState, EXTENDED_DIM, RAW_DIM};

pub use report::{conditional_probability_report, selection_frequency_report, ConditionalRow, FrequencyTable};

pub const RECORD_VERSION: u32 = 1;

/// Strategies applied by frozen (inactive) agents.
pub const FROZEN_DEFAULTS: [&str; 4] = ["Basic", "AdamW", "OneCycle", "CB"];

/// Which agents choose; inactive ones hold their frozen default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask {
    pub active: [bool; 4],
}

impl Default for AblationMask {
    fn default() -> Self {
        Self { active: [true; 4] }
    }
}

impl AblationMask {
    pub const NAMES: [&'static str; 6] = ["full", "no-aug", "no-opt", "no-lrs", "no-loss", "no-all"];

    /// `full`, `no-aug`, `no-opt`, `no-lrs`, `no-loss`, `no-all`; also comma-separated
    /// removals such as `no-aug,no-loss`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut active = [true; 4];
        for part in s.split(',').map(str::trim) {
            match part.to_ascii_lowercase().as_str() {
                "full" => {}
                "no-all" | "none" | "static" => active = [false; 4],
                other => {
                    let comp = other
                        .strip_prefix("no-")
                        .ok_or_else(|| Error::Usage(format!("unknown mask `{part}`")))?;
                    active[Component::parse(comp).map_err(|_| Error::Usage(format!("unknown mask `{part}`")))?.index()] = false;
                }
            }
        }
        Ok(Self { active })
    }

    pub fn label(&self) -> String {
        if self.active == [true; 4] {
            return "full".into();
        }
        if self.active == [false; 4] {
            return "no-all".into();
        }
        Component::ALL
            .iter()
            .filter(|c| !self.active[c.index()])
            .map(|c| format!("no-{}", c.key()))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn is_active(&self, c: Component) -> bool {
        self.active[c.index()]
    }
}

pub fn frozen_config(catalog: &Catalog) -> Result<JointConfig> {
    catalog.config_from_names(FROZEN_DEFAULTS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub aug: String,
    pub opt: String,
    pub lrs: String,
    pub loss: String,
}

impl NamedConfig {
    pub fn new(catalog: &Catalog, c: &JointConfig) -> Self {
        let [aug, opt, lrs, loss] = catalog.names(c).map(str::to_string);
        Self { aug, opt, lrs, loss }
    }

    pub fn as_array(&self) -> [&str; 4] {
        [&self.aug, &self.opt, &self.lrs, &self.loss]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeMode {
    Train,
    Eval,
}

impl EpisodeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeMode::Train => "train",
            EpisodeMode::Eval => "eval",
        }
    }
}

/// One line of the decision log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub v: u32,
    pub episode: usize,
    pub mode: EpisodeMode,
    pub step: usize,
    pub state_digest: String,
    pub config: NamedConfig,
    pub config_index: usize,
    pub reward: RewardBreakdown,
    pub intrinsic: f64,
    /// Reward stored in the replay buffer.
    pub combined: f64,
    pub epsilon: [f64; 4],
    /// Value estimate of each active agent's chosen action.
    pub q_values: [Option<f64>; 4],
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub mode: EpisodeMode,
    pub env_seed: u64,
    pub steps: usize,
    pub final_metrics: MetricsReport,
    pub total_reward: f64,
    pub initial_metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub final_metrics: MetricsReport,
    pub episodes: Vec<EpisodeSummary>,
    pub decisions: Vec<DecisionRecord>,
    pub selection_frequency: FrequencyTable,
    /// Decision steps taken across all episodes.
    pub steps: usize,
}

impl RunResult {
    /// `map_val` after each step of episode `episode`.
    pub fn map_trajectory(&self, episode: usize) -> Vec<f64> {
        self.decisions
            .iter()
            .filter(|d| d.episode == episode)
            .map(|d| d.metrics.map_val)
            .collect()
    }
}

fn training_state(m: &MetricsReport, prev_loss: f64, t: usize, horizon: usize) -> TrainingState {
    TrainingState {
        map_val: m.map_val,
        loss_train: m.loss_train,
        loss_val: m.loss_val,
        delta_loss_val: prev_loss - m.loss_val,
        grad_norm: m.grad_norm,
        rel_update_mag: m.rel_update_mag,
        texture_richness: m.texture_richness,
        epoch_frac: t as f64 / horizon.max(1) as f64,
    }
}

/// Component-attributed rewards: the combined reward split in proportion to
/// each component's non-negative share of the interval's progress.
pub fn attribute_reward(combined: f64, gains: &[f64; 4]) -> [f64; 4] {
    let pos: Vec<f64> = gains.iter().map(|g| g.max(0.0)).collect();
    let total: f64 = pos.iter().sum();
    let mut out = [combined / 4.0; 4];
    if total > 0.0 {
        for k in 0..4 {
            out[k] = combined * pos[k] / total;
        }
    }
    out
}

pub struct Controller {
    cfg: RunConfig,
    catalog: Catalog,
    agents: Vec<Agent>,
    builder: StateBuilder,
    reward: RewardCalculator,
    forward: Option<ForwardModel>,
    replay: ReplayBuffer<Transition>,
    frozen: JointConfig,
    explore_rng: Rng,
    replay_rng: Rng,
    schedule: Option<ExplorationSchedule>,
    train_steps: u64,
    episodes_run: usize,
    warned_attribution: bool,
}

impl Controller {
    pub fn new(cfg: RunConfig, catalog: Catalog) -> Result<Self> {
        cfg.validate()?;
        let sizes = catalog.sizes();
        let mut agents = Vec::with_capacity(4);
        for (k, m) in sizes.iter().enumerate() {
            let mut init = rng::stream(cfg.seed, rng::AGENT_INIT + k as u64);
            agents.push(Agent::new(EXTENDED_DIM, *m, &cfg.agent, &mut init)?);
        }
        let forward = if cfg.curiosity.enabled {
            let mut init = rng::stream(cfg.seed, rng::CURIOSITY);
            Some(ForwardModel::new(EXTENDED_DIM, sizes, RAW_DIM, &cfg.curiosity.hidden, &mut init)?)
        } else {
            None
        };
        let schedule = match cfg.exploration.horizon {
            Some(h) => Some(ExplorationSchedule::new(cfg.exploration.eps_start, cfg.exploration.eps_end, h)?),
            None => None,
        };
        Ok(Self {
            builder: StateBuilder::new(cfg.ema)?,
            reward: RewardCalculator::new(cfg.reward)?,
            replay: ReplayBuffer::new(cfg.replay_capacity)?,
            frozen: frozen_config(&catalog)?,
            explore_rng: rng::stream(cfg.seed, rng::EXPLORATION),
            replay_rng: rng::stream(cfg.seed, rng::REPLAY),
            agents,
            forward,
            schedule,
            train_steps: 0,
            episodes_run: 0,
            warned_attribution: false,
            cfg,
            catalog,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn replay(&self) -> &ReplayBuffer<Transition> {
        &self.replay
    }

    pub fn forward_model(&self) -> Option<&ForwardModel> {
        self.forward.as_ref()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    fn episode_len<E: Environment + ?Sized>(&self, env: &E) -> usize {
        let h = env.horizon();
        self.cfg.steps.map_or(h, |s| s.min(h))
    }

    fn epsilon(&mut self, planned_steps: u64) -> f64 {
        let schedule = *self.schedule.get_or_insert(ExplorationSchedule {
            eps_start: self.cfg.exploration.eps_start,
            eps_end: self.cfg.exploration.eps_end,
            horizon: planned_steps.max(1),
        });
        schedule.epsilon_at(self.train_steps)
    }

    fn learn(&mut self) -> Result<()> {
        let min_fill = self.cfg.min_fill_factor * self.cfg.agent.minibatch;
        if self.replay.len() < min_fill.max(1) {
            return Ok(());
        }
        for k in 0..4 {
            if !self.cfg.mask.active[k] || !self.agents[k].uses_replay() {
                continue;
            }
            let batch = self.replay.sample(self.cfg.agent.minibatch, &mut self.replay_rng)?;
            let samples: Vec<TdSample<'_>> = batch
                .iter()
                .map(|t| TdSample {
                    state: &t.item.state,
                    action: t.item.joint_action.as_array()[k],
                    reward: t.item.reward_for(k),
                    next_state: &t.item.next_state,
                    terminal: t.item.terminal,
                })
                .collect();
            let out = self.agents[k].learn(&samples)?;
            if let Some(o) = out {
                if !o.applied {
                    log::warn!("agent {k}: update skipped (non-finite gradient)");
                }
            }
        }
        Ok(())
    }

    /// Plays one episode. Training episodes explore, store transitions and learn;
    /// evaluation episodes act greedily and change nothing but the state statistics.
    pub fn run_episode<E: Environment + ?Sized>(
        &mut self,
        env: &mut E,
        env_seed: u64,
        mode: EpisodeMode,
        planned_train_steps: u64,
        log: &mut Vec<DecisionRecord>,
    ) -> Result<EpisodeSummary> {
        let episode = self.episodes_run;
        self.episodes_run += 1;
        let horizon = env.horizon();
        let len = self.episode_len(env);
        let initial = env.reset(env_seed)?;
        initial.validate()?;
        self.builder.reset_history();
        self.reward.reset(initial.loss_val);
        let mut prev = initial.clone();
        let mut state = self.builder.extend(&training_state(&initial, initial.loss_val, 0, horizon))?;
        let mut total_reward = 0.0;
        let mut steps = 0;

        for t in 0..len {
            let train = mode == EpisodeMode::Train;
            let eps = if train { self.epsilon(planned_train_steps) } else { 0.0 };
            let mut ids = self.frozen.as_array();
            let mut epsilon = [0.0; 4];
            let mut q_values = [None; 4];
            for k in 0..4 {
                if !self.cfg.mask.active[k] {
                    continue;
                }
                let sel = if train {
                    self.agents[k].select(&state.features, eps, &mut self.explore_rng)?
                } else {
                    self.agents[k].greedy(&state.features)?
                };
                ids[k] = sel.action;
                epsilon[k] = eps;
                q_values[k] = Some(sel.value);
            }
            let config = JointConfig::from_array(ids);
            let metrics = env.execute(&config)?;
            metrics.validate()?;
            let raw = training_state(&metrics, prev.loss_val, t + 1, horizon);
            let next_state = self.builder.extend(&raw)?;
            let breakdown = self.reward.evaluate(
                &StepOutcome {
                    map_prev: prev.map_val,
                    map_cur: metrics.map_val,
                    loss_prev: prev.loss_val,
                    loss_cur: metrics.loss_val,
                },
                &config,
                &self.catalog,
            );
            let terminal = metrics.terminal || t + 1 == len;

            let mut intrinsic = 0.0;
            if train {
                if let Some(model) = self.forward.as_mut() {
                    let err = update_forward_model(model, &state.features, &config, &raw.to_array(), self.cfg.curiosity.lr)?;
                    intrinsic = self.cfg.curiosity.lambda_i * err;
                }
            }
            let combined = combine(breakdown.total, intrinsic, &self.cfg.curiosity);
            total_reward += breakdown.total;

            if train {
                let agent_rewards = if self.cfg.coordination {
                    None
                } else {
                    match env.component_gains() {
                        Some(g) => Some(attribute_reward(combined, &g)),
                        None => {
                            if !self.warned_attribution {
                                log::warn!("environment reports no component gains; using the shared reward");
                                self.warned_attribution = true;
                            }
                            None
                        }
                    }
                };
                let transition = Transition {
                    state: state.features.clone(),
                    joint_action: config,
                    reward: combined,
                    agent_rewards,
                    next_state: next_state.features.clone(),
                    terminal,
                };
                for k in 0..4 {
                    if self.cfg.mask.active[k] {
                        self.agents[k].observe(ids[k], transition.reward_for(k));
                    }
                }
                if transition.is_finite() {
                    self.replay.push(transition);
                } else {
                    log::warn!("non-finite transition dropped at step {t}");
                }
                self.learn()?;
                self.train_steps += 1;
            }

            log.push(DecisionRecord {
                v: RECORD_VERSION,
                episode,
                mode,
                step: t,
                state_digest: state.digest(),
                config: NamedConfig::new(&self.catalog, &config),
                config_index: self.catalog.config_to_index(&config)?,
                reward: breakdown,
                intrinsic,
                combined,
                epsilon,
                q_values,
                metrics: metrics.clone(),
            });
            steps += 1;
            state = next_state;
            prev = metrics;
            if prev.terminal {
                break;
            }
        }
        Ok(EpisodeSummary {
            episode,
            mode,
            env_seed,
            steps,
            final_metrics: prev,
            total_reward,
            initial_metrics: initial,
        })
    }

    /// Trains for `cfg.episodes` episodes (then one greedy episode when
    /// `cfg.evaluate`). Training episode `e` uses environment seed
    /// `derive(seed, e + 1)` (plain `seed` for a single episode); the
    /// evaluation episode uses `seed`.
    pub fn run<E: Environment + ?Sized>(&mut self, env: &mut E) -> Result<RunResult> {
        let seed = self.cfg.seed;
        let per_episode = self.episode_len(env) as u64;
        let planned = per_episode * self.cfg.episodes as u64;
        let mut decisions = Vec::new();
        let mut episodes = Vec::new();
        for e in 0..self.cfg.episodes {
            let env_seed = if self.cfg.episodes == 1 { seed } else { rng::derive(seed, e as u64 + 1) };
            episodes.push(self.run_episode(env, env_seed, EpisodeMode::Train, planned, &mut decisions)?);
        }
        if self.cfg.evaluate {
            episodes.push(self.run_episode(env, seed, EpisodeMode::Eval, planned, &mut decisions)?);
        }
        let selection_frequency = selection_frequency_report(&decisions, &self.catalog)?;
        Ok(RunResult {
            final_metrics: episodes.last().expect("at least one episode").final_metrics.clone(),
            steps: decisions.len(),
            episodes,
            decisions,
            selection_frequency,
        })
    }
}

/// Builds a controller from `cfg` and runs it against `env`.
pub fn run<E: Environment + ?Sized>(env: &mut E, cfg: &RunConfig, catalog: &Catalog) -> Result<RunResult> {
    Controller::new(cfg.clone(), catalog.clone())?.run(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_parsing() {
        assert_eq!(AblationMask::parse("full").unwrap().active, [true; 4]);
        assert_eq!(AblationMask::parse("no-aug").unwrap().active, [false, true, true, true]);
        assert_eq!(AblationMask::parse("no-aug,no-loss").unwrap().label(), "no-aug,no-loss");
        assert_eq!(AblationMask::parse("no-all").unwrap().active, [false; 4]);
        assert!(AblationMask::parse("no-foo").is_err());
        for name in AblationMask::NAMES {
            assert_eq!(AblationMask::parse(name).unwrap().label(), name);
        }
    }

    #[test]
    fn attribution_splits_reward() {
        let r = attribute_reward(2.0, &[0.1, 0.3, 0.0, -0.2]);
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 1.5).abs() < 1e-12);
        assert_eq!(r[2], 0.0);
        assert_eq!(attribute_reward(1.0, &[0.0; 4]), [0.25; 4]);
    }
}
