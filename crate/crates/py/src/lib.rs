//! Python bindings: metrics, reward, the surrogate trainer and `train`.

use std::path::PathBuf;

use adaptrain_core::bridge::{WireConfig, WireMetrics, PROTOCOL_VERSION};
use adaptrain_core::env::metrics;
use adaptrain_core::env::{Environment, MetricsReport, SyntheticTrainerSpec};
use adaptrain_core::reward::{composite, RewardComponents, RewardWeights};
use adaptrain_core::{build_default_catalog, commands, Catalog, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: adaptrain_core::Error) -> PyErr {
    match e {
        adaptrain_core::Error::Usage(_)
        | adaptrain_core::Error::InvalidInput(_)
        | adaptrain_core::Error::OutOfRange { .. }
        | adaptrain_core::Error::DimensionMismatch { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn metrics_json(m: &MetricsReport) -> String {
    serde_json::to_string(&WireMetrics::from_report(m)).expect("metrics serialize")
}

/// AP of one class; None when `labels` has no positive.
#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<Option<f64>> {
    metrics::average_precision(&scores, &labels).map_err(err)
}

/// Mean AP over classes (`scores[k][i]`, `labels[k][i]`).
#[pyfunction]
fn compute_map(scores: Vec<Vec<f64>>, labels: Vec<Vec<bool>>) -> PyResult<f64> {
    metrics::compute_map(&scores, &labels).map_err(err)
}

/// `w_map*shaped + w_stab*stability + w_conv*convergence - w_pen*penalty`.
#[pyfunction]
#[pyo3(signature = (shaped, stability, convergence, penalty, weights=(1.0, 1.0, 0.8, 0.2)))]
fn composite_reward(shaped: f64, stability: f64, convergence: f64, penalty: f64, weights: (f64, f64, f64, f64)) -> f64 {
    let c = RewardComponents {
        shaped_map_gain: shaped,
        stability,
        convergence,
        penalty,
    };
    let w = RewardWeights {
        w_map: weights.0,
        w_stab: weights.1,
        w_conv: weights.2,
        w_pen: weights.3,
    };
    composite(&c, &w).total
}

#[pyfunction]
fn protocol_version() -> &'static str {
    PROTOCOL_VERSION
}

#[pyfunction]
fn catalog_digest() -> String {
    build_default_catalog().digest()
}

/// Strategy names per component, in catalog order.
#[pyfunction]
fn strategies() -> Vec<(String, Vec<String>)> {
    build_default_catalog()
        .spaces()
        .iter()
        .map(|s| {
            (
                s.component().key().to_string(),
                s.strategies().iter().map(|d| d.name.clone()).collect(),
            )
        })
        .collect()
}

/// Runs the controller from a JSON run configuration; writes logs into
/// `out_dir` and returns the run summary as JSON.
#[pyfunction]
fn train(config_json: &str, out_dir: PathBuf) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(err)?;
    commands::cmd_train(&cfg, &out_dir).map_err(err)?;
    std::fs::read_to_string(out_dir.join("summary.json")).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// The seeded surrogate trainer. Metrics are returned as JSON objects in the
/// bridge wire format.
#[pyclass(module = "adaptrain")]
struct SyntheticTrainer {
    env: adaptrain_core::env::SyntheticTrainer,
    catalog: Catalog,
}

#[pymethods]
impl SyntheticTrainer {
    #[new]
    #[pyo3(signature = (preset="default"))]
    fn new(preset: &str) -> PyResult<Self> {
        let catalog = build_default_catalog();
        let spec = SyntheticTrainerSpec::preset(preset).map_err(err)?;
        Ok(Self {
            env: adaptrain_core::env::SyntheticTrainer::new(spec, &catalog).map_err(err)?,
            catalog,
        })
    }

    fn reset(&mut self, seed: u64) -> PyResult<String> {
        Ok(metrics_json(&self.env.reset(seed).map_err(err)?))
    }

    fn execute(&mut self, aug: &str, opt: &str, lrs: &str, loss: &str) -> PyResult<String> {
        let wire = WireConfig {
            aug: aug.into(),
            opt: opt.into(),
            lrs: lrs.into(),
            loss: loss.into(),
        };
        let c = wire.to_config(&self.catalog).map_err(err)?;
        Ok(metrics_json(&self.env.execute(&c).map_err(err)?))
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.env.horizon()
    }
}

#[pymodule]
fn adaptrain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(compute_map, m)?)?;
    m.add_function(wrap_pyfunction!(composite_reward, m)?)?;
    m.add_function(wrap_pyfunction!(protocol_version, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_digest, m)?)?;
    m.add_function(wrap_pyfunction!(strategies, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_class::<SyntheticTrainer>()?;
    Ok(())
}
