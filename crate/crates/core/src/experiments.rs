//! Multi-seed experiments on the synthetic trainer.
//!
//! Every run is seeded and internally sequential; seeds are spread over a
//! rayon pool, so results do not depend on the number of workers.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, JointConfig};
use crate::config::RunConfig;
use crate::coordinator::{self, AblationMask, Controller, EpisodeMode, RunResult};
use crate::env::synthetic::{best_static_config, static_final_map, StaticBest, SyntheticTrainer, SyntheticTrainerSpec};
use crate::env::{Environment, MetricsReport};
use crate::error::{Error, Result};
use crate::qlearn::{argmax, EpsGreedyBandit, ExplorationSchedule, PolicyKind, Thompson, Ucb1};
use crate::reward::RewardWeights;
use crate::rng;

/// Training episodes of the paired dynamic-versus-static comparison.
pub const COMPARISON_EPISODES: usize = 300;
pub const COMPARISON_SYNC_INTERVAL: u64 = 100;

/// Training episodes and evaluation spacing of the curiosity ablation.
pub const CURIOSITY_EPISODES: usize = 100;
pub const CURIOSITY_EVAL_EVERY: usize = 10;

/// `base` with the comparison protocol: multi-episode training, a shorter
/// target-sync interval and a final greedy episode.
pub fn comparison_config(base: &RunConfig) -> RunConfig {
    let mut cfg = base.clone();
    cfg.episodes = COMPARISON_EPISODES;
    cfg.agent.sync_interval = COMPARISON_SYNC_INTERVAL;
    cfg.evaluate = true;
    cfg
}

/// Whether `c` collects any interaction bonus of `spec`.
pub fn has_interaction(spec: &SyntheticTrainerSpec, catalog: &Catalog, c: &JointConfig) -> bool {
    let names = catalog.names(c);
    spec.interactions
        .iter()
        .any(|i| names[i.first.component.index()] == i.first.name && names[i.second.component.index()] == i.second.name)
}

/// Midpoint between the best static final mAP overall and the best among
/// configurations without an interaction bonus. Reaching it requires finding
/// a rewarded combination.
pub fn interaction_threshold(spec: &SyntheticTrainerSpec, catalog: &Catalog, seeds: &[u64]) -> Result<f64> {
    let best = best_static_config(spec, catalog, seeds)?;
    let plain = catalog
        .enumerate()
        .zip(&best.all)
        .filter(|(c, _)| !has_interaction(spec, catalog, c))
        .map(|(_, m)| *m)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best.mean_final_map + plain) / 2.0)
}

/// Runs `f` on a pool of `workers` threads (the global pool when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// One-sided sign test: `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    let mut p = 0.0;
    for k in wins..=n {
        p += binomial(n, k) * 0.5f64.powi(n as i32);
    }
    p.min(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (0 for fewer than two values).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Median with `None` (never reached) ordered above every value.
pub fn median_steps(xs: &[Option<usize>]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v: Vec<Option<usize>> = xs.to_vec();
    v.sort_by(|a, b| match (a, b) {
        (Some(x), Some(y)) => x.cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2].map(|x| x as f64)
    } else {
        match (v[n / 2 - 1], v[n / 2]) {
            (Some(a), Some(b)) => Some((a + b) as f64 / 2.0),
            _ => None,
        }
    }
}

/// First 1-based step of `episode` whose `map_val` reaches `threshold`.
pub fn first_step_reaching(result: &RunResult, episode: usize, threshold: f64) -> Option<usize> {
    result
        .map_trajectory(episode)
        .iter()
        .position(|m| *m >= threshold)
        .map(|i| i + 1)
}

fn run_controller(spec: &SyntheticTrainerSpec, catalog: &Catalog, cfg: &RunConfig) -> Result<RunResult> {
    let mut env = SyntheticTrainer::new(spec.clone(), catalog)?;
    coordinator::run(&mut env, cfg, catalog)
}

/// Metrics of the last episode of each seed's run.
fn final_eval(result: &RunResult) -> &MetricsReport {
    &result.final_metrics
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairedRow {
    pub seed: u64,
    pub dynamic_map: f64,
    pub static_map: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicVsStatic {
    pub static_config: JointConfig,
    pub static_mean_map: f64,
    pub rows: Vec<PairedRow>,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
    pub mean_dynamic: f64,
    pub mean_static: f64,
}

/// Trains a controller per seed, plays a greedy episode on environment seed
/// `seed`, and compares its final mAP with the best static configuration
/// (brute force over the joint space, averaged over the same seeds) on that
/// same environment seed.
pub fn dynamic_vs_static(spec: &SyntheticTrainerSpec, catalog: &Catalog, base: &RunConfig, seeds: &[u64]) -> Result<DynamicVsStatic> {
    let best: StaticBest = best_static_config(spec, catalog, seeds)?;
    let rows: Vec<PairedRow> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.evaluate = true;
            let result = run_controller(spec, catalog, &cfg)?;
            let mut env = SyntheticTrainer::new(spec.clone(), catalog)?;
            Ok(PairedRow {
                seed,
                dynamic_map: final_eval(&result).map_val,
                static_map: static_final_map(&mut env, &best.config, seed)?,
            })
        })
        .collect::<Result<_>>()?;
    let wins = rows.iter().filter(|r| r.dynamic_map > r.static_map).count();
    let losses = rows.iter().filter(|r| r.dynamic_map < r.static_map).count();
    let dynamic: Vec<f64> = rows.iter().map(|r| r.dynamic_map).collect();
    let stat: Vec<f64> = rows.iter().map(|r| r.static_map).collect();
    Ok(DynamicVsStatic {
        static_config: best.config,
        static_mean_map: best.mean_final_map,
        wins,
        losses,
        ties: rows.len() - wins - losses,
        p_value: sign_test_p(wins, losses),
        mean_dynamic: mean(&dynamic),
        mean_static: mean(&stat),
        rows,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuriosityRow {
    pub seed: u64,
    pub steps_on: Option<usize>,
    pub steps_off: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuriosityAblation {
    pub threshold: f64,
    pub rows: Vec<CuriosityRow>,
    pub median_on: Option<f64>,
    pub median_off: Option<f64>,
}

/// Final mAP of a greedy episode (environment seed = run seed) after every
/// `eval_every` training episodes, keyed by training decision steps so far.
pub fn greedy_learning_curve(
    spec: &SyntheticTrainerSpec,
    catalog: &Catalog,
    cfg: &RunConfig,
    eval_every: usize,
) -> Result<Vec<(u64, f64)>> {
    if eval_every == 0 {
        return Err(Error::Usage("eval_every must be >= 1".into()));
    }
    let mut env = SyntheticTrainer::new(spec.clone(), catalog)?;
    let mut ctl = Controller::new(cfg.clone(), catalog.clone())?;
    let planned = (spec.horizon.min(cfg.steps.unwrap_or(usize::MAX)) * cfg.episodes) as u64;
    let mut scratch = Vec::new();
    let mut curve = Vec::new();
    for e in 0..cfg.episodes {
        ctl.run_episode(&mut env, rng::derive(cfg.seed, e as u64 + 1), EpisodeMode::Train, planned, &mut scratch)?;
        scratch.clear();
        if (e + 1) % eval_every == 0 {
            let eval = ctl.run_episode(&mut env, cfg.seed, EpisodeMode::Eval, planned, &mut scratch)?;
            scratch.clear();
            curve.push((ctl.train_steps(), eval.final_metrics.map_val));
        }
    }
    Ok(curve)
}

/// Training steps before the first greedy evaluation reaching `threshold`.
pub fn steps_to_threshold(curve: &[(u64, f64)], threshold: f64) -> Option<usize> {
    curve.iter().find(|(_, m)| *m >= threshold).map(|(s, _)| *s as usize)
}

/// Same seeds with the intrinsic reward on and off.
pub fn curiosity_ablation(
    spec: &SyntheticTrainerSpec,
    catalog: &Catalog,
    base: &RunConfig,
    seeds: &[u64],
    threshold: f64,
    eval_every: usize,
) -> Result<CuriosityAblation> {
    let rows: Vec<CuriosityRow> = seeds
        .par_iter()
        .map(|&seed| {
            let mut on = base.clone();
            on.seed = seed;
            on.curiosity.enabled = true;
            let mut off = on.clone();
            off.curiosity.enabled = false;
            Ok(CuriosityRow {
                seed,
                steps_on: steps_to_threshold(&greedy_learning_curve(spec, catalog, &on, eval_every)?, threshold),
                steps_off: steps_to_threshold(&greedy_learning_curve(spec, catalog, &off, eval_every)?, threshold),
            })
        })
        .collect::<Result<_>>()?;
    let on: Vec<Option<usize>> = rows.iter().map(|r| r.steps_on).collect();
    let off: Vec<Option<usize>> = rows.iter().map(|r| r.steps_off).collect();
    Ok(CuriosityAblation {
        threshold,
        median_on: median_steps(&on),
        median_off: median_steps(&off),
        rows,
    })
}

/// One weight setting of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub weights: RewardWeights,
}

/// Varies one weight (`w_map`, `w_stab`, `w_conv` or `w_pen`) over `values`,
/// holding the others at `base`.
pub fn weight_grid(base: &RewardWeights, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep grid is empty".into()));
    }
    values
        .iter()
        .map(|&v| {
            let mut w = *base;
            match param {
                "w_map" | "w-map" => w.w_map = v,
                "w_stab" | "w-stab" => w.w_stab = v,
                "w_conv" | "w-conv" => w.w_conv = v,
                "w_pen" | "w-pen" => w.w_pen = v,
                other => return Err(Error::Usage(format!("unknown sweep parameter `{other}`"))),
            }
            w.validate()?;
            Ok(SweepPoint { weights: w })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub weights: RewardWeights,
    pub runs: usize,
    pub map_mean: f64,
    pub map_std: f64,
    /// Sample variance of the per-step validation-loss changes in the final episode.
    pub loss_var_mean: f64,
    pub loss_var_std: f64,
    /// Mean first step reaching the threshold, over runs that reached it.
    pub convergence_step_mean: Option<f64>,
    pub converged_runs: usize,
}

fn loss_change_variance(result: &RunResult) -> f64 {
    let last = result.episodes.last().map_or(0, |e| e.episode);
    let summary = result.episodes.last().expect("at least one episode");
    let mut prev = summary.initial_metrics.loss_val;
    let deltas: Vec<f64> = result
        .decisions
        .iter()
        .filter(|d| d.episode == last)
        .map(|d| {
            let delta = d.metrics.loss_val - prev;
            prev = d.metrics.loss_val;
            delta
        })
        .collect();
    std_dev(&deltas).powi(2)
}

/// One run per grid point per seed; rows follow grid order.
pub fn sweep(
    spec: &SyntheticTrainerSpec,
    catalog: &Catalog,
    base: &RunConfig,
    grid: &[SweepPoint],
    seeds: &[u64],
    threshold: f64,
    workers: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::Usage("sweep needs a non-empty grid and seed list".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..grid.len()).flat_map(|g| seeds.iter().map(move |&s| (g, s))).collect();
    let outcomes: Vec<(f64, f64, Option<usize>)> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(g, seed)| {
                let mut cfg = base.clone();
                cfg.seed = seed;
                cfg.reward.weights = grid[g].weights;
                let r = run_controller(spec, catalog, &cfg)?;
                let last = r.episodes.last().expect("at least one episode").episode;
                Ok((r.final_metrics.map_val, loss_change_variance(&r), first_step_reaching(&r, last, threshold)))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let mine = &outcomes[g * seeds.len()..(g + 1) * seeds.len()];
            let maps: Vec<f64> = mine.iter().map(|o| o.0).collect();
            let vars: Vec<f64> = mine.iter().map(|o| o.1).collect();
            let conv: Vec<f64> = mine.iter().filter_map(|o| o.2.map(|s| s as f64)).collect();
            SweepRow {
                weights: p.weights,
                runs: mine.len(),
                map_mean: mean(&maps),
                map_std: std_dev(&maps),
                loss_var_mean: mean(&vars),
                loss_var_std: std_dev(&vars),
                convergence_step_mean: (!conv.is_empty()).then(|| mean(&conv)),
                converged_runs: conv.len(),
            }
        })
        .collect())
}

/// Stationary Gaussian bandit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditFixture {
    pub means: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for BanditFixture {
    fn default() -> Self {
        Self {
            means: vec![0.2, 0.5, 0.8],
            noise_sd: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    pub policy: PolicyKind,
    /// Greedy choice after the last pull.
    pub final_choice: usize,
    /// Cumulative expected regret after each pull.
    pub regret: Vec<f64>,
}

/// Plays `pulls` rounds of `fixture` with a stationary form of `policy`
/// (no discounting; epsilon decays from 1 to 0.1 over the first tenth).
pub fn run_bandit(policy: PolicyKind, fixture: &BanditFixture, pulls: usize, seed: u64) -> Result<BanditRun> {
    let arms = fixture.means.len();
    if arms == 0 {
        return Err(Error::InvalidInput("bandit needs at least one arm".into()));
    }
    let best = fixture.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut env_rng = rng::stream(seed, rng::ENV);
    let mut pol_rng = rng::stream(seed, rng::BANDIT);
    let schedule = ExplorationSchedule::new(1.0, 0.1, (pulls as u64 / 10).max(1))?;
    enum P {
        Eps(EpsGreedyBandit),
        Ucb(Ucb1),
        Ts(Thompson),
    }
    let mut p = match policy {
        PolicyKind::EpsGreedyDqn => P::Eps(EpsGreedyBandit::new(arms, 1.0)),
        PolicyKind::Ucb1 => P::Ucb(Ucb1::new(arms, std::f64::consts::SQRT_2, 1.0)),
        PolicyKind::Thompson => P::Ts(Thompson::new(arms, fixture.noise_sd.powi(2).max(1e-12), 1.0)),
    };
    let mut regret = Vec::with_capacity(pulls);
    let mut total = 0.0;
    for t in 0..pulls {
        let arm = match &p {
            P::Eps(b) => b.select(schedule.epsilon_at(t as u64), &mut pol_rng),
            P::Ucb(b) => b.select(),
            P::Ts(b) => b.select(&mut pol_rng),
        };
        let noise: f64 = env_rng.sample(StandardNormal);
        let reward = fixture.means[arm] + fixture.noise_sd * noise;
        match &mut p {
            P::Eps(b) => b.update(arm, reward),
            P::Ucb(b) => b.update(arm, reward),
            P::Ts(b) => b.update(arm, reward),
        }
        total += best - fixture.means[arm];
        regret.push(total);
    }
    let means = match &p {
        P::Eps(b) => b.stats.means(),
        P::Ucb(b) => b.stats.means(),
        P::Ts(b) => b.stats.means(),
    };
    Ok(BanditRun {
        policy,
        final_choice: argmax(&means),
        regret,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: PolicyKind,
    /// Share of bandit seeds whose final greedy choice is the best arm.
    pub best_arm_rate: f64,
    pub regret_1k: f64,
    pub regret_10k: f64,
    pub surrogate_map_mean: f64,
    /// Median first step of the final episode reaching the threshold.
    pub steps_to_threshold: Option<f64>,
}

/// Bandit identification and regret plus a surrogate run per policy.
pub fn compare_policies(
    spec: &SyntheticTrainerSpec,
    catalog: &Catalog,
    base: &RunConfig,
    fixture: &BanditFixture,
    bandit_seeds: &[u64],
    surrogate_seeds: &[u64],
    threshold: f64,
) -> Result<Vec<PolicyRow>> {
    let best = argmax(&fixture.means);
    PolicyKind::ALL
        .iter()
        .map(|&policy| {
            let runs: Vec<BanditRun> = bandit_seeds
                .par_iter()
                .map(|&s| run_bandit(policy, fixture, 10_000, s))
                .collect::<Result<_>>()?;
            let hits = runs.iter().filter(|r| r.final_choice == best).count();
            let at = |n: usize| mean(&runs.iter().map(|r| r.regret[n - 1]).collect::<Vec<_>>());
            let surrogate: Vec<(f64, Option<usize>)> = surrogate_seeds
                .par_iter()
                .map(|&seed| {
                    let mut cfg = base.clone();
                    cfg.seed = seed;
                    cfg.agent.policy = policy;
                    let r = run_controller(spec, catalog, &cfg)?;
                    let last = r.episodes.last().expect("at least one episode").episode;
                    Ok((r.final_metrics.map_val, first_step_reaching(&r, last, threshold)))
                })
                .collect::<Result<_>>()?;
            Ok(PolicyRow {
                policy,
                best_arm_rate: hits as f64 / runs.len().max(1) as f64,
                regret_1k: at(1_000),
                regret_10k: at(10_000),
                surrogate_map_mean: mean(&surrogate.iter().map(|s| s.0).collect::<Vec<_>>()),
                steps_to_threshold: median_steps(&surrogate.iter().map(|s| s.1).collect::<Vec<_>>()),
            })
        })
        .collect()
}

/// The static baseline of the long-tail table.
pub const BCE_BASELINE: [&str; 4] = ["Basic", "AdamW", "OneCycle", "BCE"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongtailRow {
    pub preset: String,
    pub rho: f64,
    pub metric: String,
    pub static_bce: f64,
    pub controller: f64,
}

pub const LONGTAIL_METRICS: [&str; 4] = ["head_f1", "mid_f1", "tail_f1", "bacc"];

fn strata(m: &MetricsReport) -> [f64; 4] {
    [m.head_f1, m.mid_f1, m.tail_f1, m.bacc]
}

/// Mean final head/mid/tail F1 and balanced accuracy of a static run.
pub fn static_strata(spec: &SyntheticTrainerSpec, catalog: &Catalog, c: &JointConfig, seeds: &[u64]) -> Result<[f64; 4]> {
    let mut env = SyntheticTrainer::new(spec.clone(), catalog)?;
    let mut acc = [0.0; 4];
    for &s in seeds {
        let mut last = env.reset(s)?;
        for _ in 0..env.horizon() {
            last = env.execute(c)?;
        }
        for (a, v) in acc.iter_mut().zip(strata(&last)) {
            *a += v / seeds.len() as f64;
        }
    }
    Ok(acc)
}

/// Four metric rows per spec: static BCE baseline against the trained controller.
pub fn longtail(specs: &[SyntheticTrainerSpec], catalog: &Catalog, base: &RunConfig, seeds: &[u64]) -> Result<Vec<LongtailRow>> {
    let baseline = catalog.config_from_names(BCE_BASELINE)?;
    let mut rows = Vec::new();
    for spec in specs {
        let stat = static_strata(spec, catalog, &baseline, seeds)?;
        let learned: Vec<[f64; 4]> = seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = base.clone();
                cfg.seed = seed;
                let r = run_controller(spec, catalog, &cfg)?;
                Ok(strata(&r.final_metrics))
            })
            .collect::<Result<_>>()?;
        for (i, name) in LONGTAIL_METRICS.iter().enumerate() {
            rows.push(LongtailRow {
                preset: spec.name.clone(),
                rho: spec.rho,
                metric: name.to_string(),
                static_bce: stat[i],
                controller: mean(&learned.iter().map(|l| l[i]).collect::<Vec<_>>()),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub map_mean: f64,
    pub map_std: f64,
    pub rare_f1_mean: f64,
    pub maps: Vec<f64>,
}

/// Ablation variants: mask names plus `no-coordination`.
pub fn ablate(spec: &SyntheticTrainerSpec, catalog: &Catalog, base: &RunConfig, variants: &[String], seeds: &[u64]) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            if v == "no-coordination" || v == "no-coord" {
                cfg.coordination = false;
            } else {
                cfg.mask = AblationMask::parse(v)?;
            }
            let results: Vec<MetricsReport> = seeds
                .par_iter()
                .map(|&seed| {
                    let mut c = cfg.clone();
                    c.seed = seed;
                    Ok(run_controller(spec, catalog, &c)?.final_metrics)
                })
                .collect::<Result<_>>()?;
            let maps: Vec<f64> = results.iter().map(|m| m.map_val).collect();
            Ok(AblationRow {
                variant: v.clone(),
                map_mean: mean(&maps),
                map_std: std_dev(&maps),
                rare_f1_mean: mean(&results.iter().map(|m| m.rare_f1).collect::<Vec<_>>()),
                maps,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test_p(0, 0), 1.0);
        assert!((sign_test_p(1, 0) - 0.5).abs() < 1e-15);
        // P(X >= 15 | n = 20) = 21700 / 2^20.
        assert!((sign_test_p(15, 5) - 21_700.0 / 1_048_576.0).abs() < 1e-15);
        assert!(sign_test_p(14, 6) > 0.05);
    }

    #[test]
    fn medians() {
        assert_eq!(median_steps(&[Some(3), None, Some(1)]), Some(3.0));
        assert_eq!(median_steps(&[Some(2), Some(4)]), Some(3.0));
        assert_eq!(median_steps(&[Some(2), None]), None);
    }

    #[test]
    fn grid_order_and_errors() {
        let g = weight_grid(&RewardWeights::default(), "w_map", &[0.4, 0.8]).unwrap();
        assert_eq!(g[1].weights.w_map, 0.8);
        assert_eq!(g[1].weights.w_stab, 1.0);
        assert!(weight_grid(&RewardWeights::default(), "w_x", &[1.0]).is_err());
        assert!(weight_grid(&RewardWeights::default(), "w_map", &[]).is_err());
    }

    #[test]
    fn single_arm_has_no_regret() {
        let f = BanditFixture {
            means: vec![0.3],
            noise_sd: 1.0,
        };
        for p in PolicyKind::ALL {
            let r = run_bandit(p, &f, 100, 1).unwrap();
            assert_eq!(r.regret.last().copied(), Some(0.0));
        }
    }
}
