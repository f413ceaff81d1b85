//! Experiment configuration, ensemble execution and artifact output.

mod bundle;
mod config;
mod ensemble;
mod experiments;
mod plot;
mod table;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use bundle::{run_and_persist, ArtifactBundle, PlotSpec, FAILURE_FILE, MANIFEST_FILE, REPLAY_FILE, SUMMARY_FILE};
pub use config::*;
pub use ensemble::{run_ensemble, EnsembleOutcome, EnsembleStats, RealizationFailure};
pub use experiments::{
    execute, fig6_preset, preset, run_experiment, ExperimentFailure, FIG4_CHECK_TIME, PRESET_COUPLING_OVER_2PI_HZ,
    PRESET_GAMMA_OVER_J, PRESET_GAMMA_PER_S,
};
pub use plot::{emit_plots, render_heatmap, render_lines};
pub use table::{Provenance, Table, ARTIFACT_VERSION};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure{}{}: {message}",
        realization.map(|k| format!(" in realization {k}")).unwrap_or_default(),
        time.map(|t| format!(" at Jt = {t}")).unwrap_or_default())]
    Numerical { realization: Option<u64>, time: Option<f64>, message: String },
    #[error("{}: {source}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "i/o".into()))]
    Io { path: Option<PathBuf>, source: std::io::Error },
    #[error("malformed artifact: {0}")]
    Format(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: Some(path.to_path_buf()), source }
    }

    /// Process exit status: 2 usage or configuration, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) => 2,
            HarnessError::Numerical { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Format(_) => 4,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(source: std::io::Error) -> Self {
        HarnessError::Io { path: None, source }
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(source) => HarnessError::Io { path: None, source },
                other => HarnessError::Format(format!("{other:?}")),
            }
        } else {
            HarnessError::Format(e.to_string())
        }
    }
}
