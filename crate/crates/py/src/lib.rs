//! Python module `nemsim`: Table 1 estimates, experiment presets and runs.
//! Tables come back as `{name: {"columns": [...], "rows": [[...]]}}`.

use std::path::PathBuf;

use nemsim::harness::{fig6_preset, preset, run_and_persist, run_experiment, ArtifactBundle, ExperimentConfig, HarnessError};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: HarnessError) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyOSError::new_err(e.to_string()),
    }
}

fn config(text: &str, seed: Option<u64>, realizations: Option<usize>, workers: Option<usize>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml_str(text).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(r) = realizations {
        cfg.realizations = r;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

fn bundle_dict<'py>(py: Python<'py>, bundle: &ArtifactBundle) -> PyResult<Bound<'py, PyDict>> {
    let tables = PyDict::new(py);
    for t in &bundle.tables {
        let d = PyDict::new(py);
        d.set_item("columns", &t.columns)?;
        d.set_item("rows", &t.rows)?;
        tables.set_item(&t.name, d)?;
    }
    let summary = serde_json::to_string(&bundle.summary).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    out.set_item("kind", bundle.kind.name())?;
    out.set_item("config_hash", bundle.provenance().config_hash)?;
    out.set_item("tables", tables)?;
    out.set_item("summary", py.import("json")?.call_method1("loads", (summary,))?)?;
    Ok(out)
}

/// Table 1 rows as dicts keyed by column name.
#[pyfunction]
fn table1(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    let rows = nemsim::params::table1().map_err(|e| PyValueError::new_err(e.to_string()))?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("omega_over_2pi_GHz", r.omega_over_2pi_ghz)?;
            d.set_item("dV_V", r.dv_v)?;
            d.set_item("lambda_over_2pi_MHz", r.lambda_over_2pi_mhz)?;
            d.set_item("J_over_2pi_MHz", r.j_over_2pi_mhz)?;
            Ok(d)
        })
        .collect()
}

/// TOML text of a named preset (`table1`, `fig2` ... `fig7`).
#[pyfunction]
#[pyo3(signature = (name, full = false))]
fn preset_toml(name: &str, full: bool) -> PyResult<String> {
    let cfg = match name {
        "fig6" => fig6_preset(full),
        _ => preset(name.parse().map_err(to_py)?, full),
    };
    Ok(cfg.to_toml_string())
}

/// Runs the experiment in `config` (TOML text) and returns its tables and summary.
#[pyfunction]
#[pyo3(signature = (config, seed = None, realizations = None, workers = None))]
fn run<'py>(
    py: Python<'py>,
    config: &str,
    seed: Option<u64>,
    realizations: Option<usize>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = self::config(config, seed, realizations, workers)?;
    let bundle = py.detach(|| run_experiment(&cfg)).map_err(to_py)?;
    bundle_dict(py, &bundle)
}

/// Like `run`, but also writes the bundle to `out_dir` and returns the table paths.
#[pyfunction]
#[pyo3(signature = (config, out_dir, seed = None, realizations = None, workers = None))]
fn run_to_dir(
    py: Python<'_>,
    config: &str,
    out_dir: PathBuf,
    seed: Option<u64>,
    realizations: Option<usize>,
    workers: Option<usize>,
) -> PyResult<Vec<PathBuf>> {
    let cfg = self::config(config, seed, realizations, workers)?;
    let bundle = py.detach(|| run_and_persist(&cfg, &out_dir)).map_err(to_py)?;
    Ok(bundle.tables.iter().map(|t| out_dir.join(t.file_name(cfg.format))).collect())
}

#[pymodule]
#[pyo3(name = "nemsim")]
fn nemsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    m.add_function(wrap_pyfunction!(preset_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_dir, m)?)?;
    Ok(())
}
