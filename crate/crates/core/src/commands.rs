//! What the `adaptrain` subcommands do, minus argument parsing.
//!
//! Every command writes into an output directory. Tables are CSV files whose
//! first line is `# <table> v<version>`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::config::RunConfig;
use crate::coordinator::report::{conditional_csv, frequency_csv, write_run_outputs};
use crate::coordinator::{self, conditional_probability_report, selection_frequency_report, DecisionRecord, FrequencyTable, RunResult};
use crate::env::{SyntheticTrainer, SyntheticTrainerSpec};
use crate::error::{Error, Result};
use crate::experiments::{self, AblationRow, BanditFixture, LongtailRow, PolicyRow, SweepRow};

pub const TABLE_VERSION: u32 = 1;

/// Presets used by `longtail` when none are named.
pub const LONGTAIL_PRESETS: [&str; 4] = ["rho1", "rho2", "rho5", "rho10"];

/// `n` consecutive seeds starting at `first`.
pub fn seed_list(first: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| first.wrapping_add(i)).collect()
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn header(table: &str, columns: &str) -> String {
    format!("# {table} v{TABLE_VERSION}\n{columns}\n")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RunSummary {
    version: u32,
    seed: u64,
    preset: String,
    steps: usize,
    final_metrics: crate::env::MetricsReport,
    episodes: Vec<coordinator::EpisodeSummary>,
}

/// Runs the controller on the configured surrogate and writes the run outputs
/// plus `config.json` and `summary.json`.
pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<RunResult> {
    let catalog = cfg.load_catalog()?;
    let spec = cfg.env.load_spec()?;
    let preset = spec.name.clone();
    let mut env = SyntheticTrainer::new(spec, &catalog)?;
    let result = coordinator::run(&mut env, cfg, &catalog)?;
    write_run_outputs(out, &result, &catalog)?;
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;
    let summary = RunSummary {
        version: TABLE_VERSION,
        seed: cfg.seed,
        preset,
        steps: result.steps,
        final_metrics: result.final_metrics.clone(),
        episodes: result.episodes.clone(),
    };
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(result)
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mut out = header(
        "sweep",
        "param,value,w_map,w_stab,w_conv,w_pen,runs,map_mean,map_std,loss_var_mean,loss_var_std,convergence_step_mean,converged_runs",
    );
    for r in rows {
        let w = &r.weights;
        let value = match param {
            "w_map" | "w-map" => w.w_map,
            "w_stab" | "w-stab" => w.w_stab,
            "w_conv" | "w-conv" => w.w_conv,
            _ => w.w_pen,
        };
        let _ = writeln!(
            out,
            "{param},{value},{},{},{},{},{},{},{},{},{},{},{}",
            w.w_map,
            w.w_stab,
            w.w_conv,
            w.w_pen,
            r.runs,
            r.map_mean,
            r.map_std,
            r.loss_var_mean,
            r.loss_var_std,
            fmt_opt(r.convergence_step_mean),
            r.converged_runs
        );
    }
    out
}

/// Sweeps one reward weight; writes `sweep.csv`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    param: &str,
    values: &[f64],
    seeds: &[u64],
    threshold: f64,
    workers: Option<usize>,
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let catalog = cfg.load_catalog()?;
    let spec = cfg.env.load_spec()?;
    let grid = experiments::weight_grid(&cfg.reward.weights, param, values)?;
    let rows = experiments::sweep(&spec, &catalog, cfg, &grid, seeds, threshold, workers)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("sweep.csv"), sweep_csv(param, &rows))?;
    Ok(rows)
}

pub fn policies_csv(rows: &[PolicyRow]) -> String {
    let mut out = header(
        "policies",
        "policy,best_arm_rate,regret_1k,regret_10k,surrogate_map_mean,steps_to_threshold",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.policy.as_str(),
            r.best_arm_rate,
            r.regret_1k,
            r.regret_10k,
            r.surrogate_map_mean,
            fmt_opt(r.steps_to_threshold)
        );
    }
    out
}

/// Bandit and surrogate comparison of the three policies; writes `policies.csv`.
pub fn cmd_compare_policies(
    cfg: &RunConfig,
    bandit_seeds: &[u64],
    surrogate_seeds: &[u64],
    threshold: f64,
    workers: Option<usize>,
    out: &Path,
) -> Result<Vec<PolicyRow>> {
    let catalog = cfg.load_catalog()?;
    let spec = cfg.env.load_spec()?;
    let fixture = BanditFixture::default();
    let rows = experiments::with_workers(workers, || {
        experiments::compare_policies(&spec, &catalog, cfg, &fixture, bandit_seeds, surrogate_seeds, threshold)
    })??;
    fs::create_dir_all(out)?;
    fs::write(out.join("policies.csv"), policies_csv(&rows))?;
    Ok(rows)
}

pub fn longtail_csv(rows: &[LongtailRow]) -> String {
    let mut out = header("longtail", "preset,rho,metric,static_bce,controller");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.preset, r.rho, r.metric, r.static_bce, r.controller);
    }
    out
}

/// Static BCE baseline against the controller on each preset; writes `longtail.csv`.
pub fn cmd_longtail(cfg: &RunConfig, presets: &[String], seeds: &[u64], workers: Option<usize>, out: &Path) -> Result<Vec<LongtailRow>> {
    let catalog = cfg.load_catalog()?;
    let specs = presets
        .iter()
        .map(|p| SyntheticTrainerSpec::preset(p))
        .collect::<Result<Vec<_>>>()?;
    let rows = experiments::with_workers(workers, || experiments::longtail(&specs, &catalog, cfg, seeds))??;
    fs::create_dir_all(out)?;
    fs::write(out.join("longtail.csv"), longtail_csv(&rows))?;
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = header("ablation", "variant,runs,map_mean,map_std,rare_f1_mean");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.variant,
            r.maps.len(),
            r.map_mean,
            r.map_std,
            r.rare_f1_mean
        );
    }
    out
}

/// One row per ablation variant; writes `ablation.csv`.
pub fn cmd_ablate(cfg: &RunConfig, variants: &[String], seeds: &[u64], workers: Option<usize>, out: &Path) -> Result<Vec<AblationRow>> {
    let catalog = cfg.load_catalog()?;
    let spec = cfg.env.load_spec()?;
    let rows = experiments::with_workers(workers, || experiments::ablate(&spec, &catalog, cfg, variants, seeds))??;
    fs::create_dir_all(out)?;
    fs::write(out.join("ablation.csv"), ablation_csv(&rows))?;
    Ok(rows)
}

pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::InvalidInput(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Rebuilds the selection reports of a finished run from its decision log and
/// writes them into `out`.
pub fn cmd_report(run_dir: &Path, catalog: &Catalog, out: &Path) -> Result<FrequencyTable> {
    let log = read_decisions(&run_dir.join("decisions.jsonl"))?;
    let table = selection_frequency_report(&log, catalog)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("frequency.csv"), frequency_csv(&table))?;
    fs::write(
        out.join("conditional.csv"),
        conditional_csv(&conditional_probability_report(&log, catalog)),
    )?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_consecutive() {
        assert_eq!(seed_list(5, 3), vec![5, 6, 7]);
        assert!(seed_list(0, 0).is_empty());
    }

    #[test]
    fn csv_headers_carry_versions() {
        assert!(longtail_csv(&[]).starts_with("# longtail v1\npreset,"));
        assert!(ablation_csv(&[]).starts_with("# ablation v1\n"));
        assert!(policies_csv(&[]).starts_with("# policies v1\n"));
        assert!(sweep_csv("w_map", &[]).starts_with("# sweep v1\n"));
    }
}
