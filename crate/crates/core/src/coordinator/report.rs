//! Strategy-selection reports and the on-disk run outputs.
//!
//! Files written by [`write_run_outputs`]:
//!
//! - `decisions.jsonl`: one [`DecisionRecord`] per line (field `v` is the record version).
//! - `trajectory.csv`: `# trajectory v1` then one row per decision step.
//! - `frequency.csv`: `# frequency v1`, columns `component,strategy,fraction`.
//! - `conditional.csv`: `# conditional v1`, columns
//!   `given_component,given,response_component,response,count,probability`.
//! - `features.json`: names of the extended-state entries in order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecisionRecord, RunResult};
use crate::catalog::{Catalog, Component};
use crate::error::{Error, Result};
use crate::state::StateBuilder;

/// Per-agent fraction of decision steps on which each strategy was chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// `(component, [(strategy, fraction)])` in catalog order.
    pub rows: Vec<(Component, Vec<(String, f64)>)>,
}

impl FrequencyTable {
    pub fn fraction(&self, component: Component, strategy: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|(c, _)| *c == component)
            .and_then(|(_, r)| r.iter().find(|(n, _)| n == strategy).map(|(_, f)| *f))
    }
}

pub fn selection_frequency_report(log: &[DecisionRecord], catalog: &Catalog) -> Result<FrequencyTable> {
    if log.is_empty() {
        return Err(Error::InvalidInput("selection frequencies need a non-empty log".into()));
    }
    let n = log.len() as f64;
    let rows = Component::ALL
        .iter()
        .map(|&comp| {
            let space = catalog.space(comp);
            let fractions = space
                .strategies()
                .iter()
                .map(|s| {
                    let count = log.iter().filter(|d| d.config.as_array()[comp.index()] == s.name).count();
                    (s.name.clone(), count as f64 / n)
                })
                .collect();
            (comp, fractions)
        })
        .collect();
    Ok(FrequencyTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRow {
    pub given_component: Component,
    pub given: String,
    pub response_component: Component,
    pub response: String,
    /// Steps on which `given` was chosen.
    pub count: usize,
    pub probability: f64,
}

/// `P(response | given)` for every ordered pair of components and every
/// conditioning strategy that occurs in the log.
pub fn conditional_probability_report(log: &[DecisionRecord], catalog: &Catalog) -> Vec<ConditionalRow> {
    let mut rows = Vec::new();
    for given_c in Component::ALL {
        for given in catalog.space(given_c).strategies() {
            let matching: Vec<&DecisionRecord> = log
                .iter()
                .filter(|d| d.config.as_array()[given_c.index()] == given.name)
                .collect();
            if matching.is_empty() {
                continue;
            }
            for resp_c in Component::ALL {
                if resp_c == given_c {
                    continue;
                }
                for resp in catalog.space(resp_c).strategies() {
                    let hits = matching
                        .iter()
                        .filter(|d| d.config.as_array()[resp_c.index()] == resp.name)
                        .count();
                    rows.push(ConditionalRow {
                        given_component: given_c,
                        given: given.name.clone(),
                        response_component: resp_c,
                        response: resp.name.clone(),
                        count: matching.len(),
                        probability: hits as f64 / matching.len() as f64,
                    });
                }
            }
        }
    }
    rows
}

pub fn decisions_jsonl(log: &[DecisionRecord]) -> String {
    let mut out = String::new();
    for d in log {
        out.push_str(&serde_json::to_string(d).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub const TRAJECTORY_COLUMNS: [&str; 22] = [
    "episode",
    "mode",
    "step",
    "aug",
    "opt",
    "lrs",
    "loss",
    "map_val",
    "rare_f1",
    "head_f1",
    "mid_f1",
    "tail_f1",
    "bacc",
    "loss_train",
    "loss_val",
    "grad_norm",
    "rel_update_mag",
    "texture_richness",
    "reward",
    "intrinsic",
    "combined",
    "penalty",
];

pub fn trajectory_csv(log: &[DecisionRecord]) -> String {
    let mut out = String::from("# trajectory v1\n");
    out.push_str(&TRAJECTORY_COLUMNS.join(","));
    out.push('\n');
    for d in log {
        let m = &d.metrics;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            d.episode,
            d.mode.as_str(),
            d.step,
            d.config.aug,
            d.config.opt,
            d.config.lrs,
            d.config.loss,
            m.map_val,
            m.rare_f1,
            m.head_f1,
            m.mid_f1,
            m.tail_f1,
            m.bacc,
            m.loss_train,
            m.loss_val,
            m.grad_norm,
            m.rel_update_mag,
            m.texture_richness,
            d.reward.total,
            d.intrinsic,
            d.combined,
            d.reward.penalty,
        );
    }
    out
}

pub fn frequency_csv(table: &FrequencyTable) -> String {
    let mut out = String::from("# frequency v1\ncomponent,strategy,fraction\n");
    for (comp, rows) in &table.rows {
        for (name, f) in rows {
            let _ = writeln!(out, "{comp},{name},{f}");
        }
    }
    out
}

pub fn conditional_csv(rows: &[ConditionalRow]) -> String {
    let mut out = String::from("# conditional v1\ngiven_component,given,response_component,response,count,probability\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.given_component, r.given, r.response_component, r.response, r.count, r.probability
        );
    }
    out
}

pub fn features_manifest() -> String {
    let doc = serde_json::json!({ "version": 1, "features": StateBuilder::manifest() });
    serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n"
}

/// Writes every run output into `dir` (created if missing).
pub fn write_run_outputs(dir: &Path, result: &RunResult, catalog: &Catalog) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("decisions.jsonl"), decisions_jsonl(&result.decisions))?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(&result.decisions))?;
    fs::write(dir.join("frequency.csv"), frequency_csv(&result.selection_frequency))?;
    fs::write(
        dir.join("conditional.csv"),
        conditional_csv(&conditional_probability_report(&result.decisions, catalog)),
    )?;
    fs::write(dir.join("features.json"), features_manifest())?;
    Ok(())
}
