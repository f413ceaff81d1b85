use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, ExperimentKind, OutputFormat};
use super::experiments::execute;
use super::table::{Provenance, Table, ARTIFACT_VERSION};
use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPLAY_FILE: &str = "replay.toml";
pub const FAILURE_FILE: &str = "failure.json";

/// How a table should be drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlotSpec {
    /// Colour map of `value` over the `(x, y)` grid, one image per `facet` value.
    Heatmap { table: String, x: String, y: String, value: String, facet: Option<String> },
    /// One polyline per distinct `group` value.
    Lines { table: String, x: String, y: String, group: Option<String> },
}

impl PlotSpec {
    pub fn table(&self) -> &str {
        match self {
            PlotSpec::Heatmap { table, .. } | PlotSpec::Lines { table, .. } => table,
        }
    }
}

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ArtifactBundle {
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub plots: Vec<PlotSpec>,
    pub summary: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    artifact_version: u32,
    kind: ExperimentKind,
    config_hash: String,
    seed: u64,
    format: OutputFormat,
    tables: Vec<ManifestTable>,
    plots: Vec<PlotSpec>,
}

#[derive(Serialize, Deserialize)]
struct ManifestTable {
    name: String,
    file: String,
    columns: Vec<String>,
    rows: usize,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value).map_err(|e| HarnessError::Format(e.to_string()))
}

impl ArtifactBundle {
    pub fn new(config: ExperimentConfig) -> Self {
        Self { kind: config.kind, config, tables: Vec::new(), plots: Vec::new(), summary: Map::new() }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.config.hash(), self.config.master_seed)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes tables, `summary.json`, `replay.toml` and `manifest.json` into
    /// `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let prov = self.provenance();
        let format = self.config.format;
        let mut listed = Vec::with_capacity(self.tables.len());
        for t in &self.tables {
            let file = t.file_name(format);
            let path = dir.join(&file);
            let out = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            let mut out = BufWriter::new(out);
            t.write(&mut out, format, &prov)?;
            std::io::Write::flush(&mut out).map_err(|e| HarnessError::io(&path, e))?;
            listed.push(ManifestTable { name: t.name.clone(), file, columns: t.columns.clone(), rows: t.rows.len() });
        }
        let mut summary = self.summary.clone();
        summary.insert("artifact_version".into(), json!(ARTIFACT_VERSION));
        summary.insert("config_hash".into(), json!(prov.config_hash));
        summary.insert("seed".into(), json!(prov.seed));
        summary.insert("realizations".into(), json!(self.config.realizations));
        summary.insert("config".into(), serde_json::to_value(&self.config).map_err(|e| HarnessError::Format(e.to_string()))?);
        write_json(&dir.join(SUMMARY_FILE), &summary)?;
        let replay = dir.join(REPLAY_FILE);
        fs::write(&replay, self.config.to_toml_string()).map_err(|e| HarnessError::io(&replay, e))?;
        let manifest = Manifest {
            artifact_version: ARTIFACT_VERSION,
            kind: self.kind,
            config_hash: prov.config_hash,
            seed: prov.seed,
            format,
            tables: listed,
            plots: self.plots.clone(),
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)
    }

    /// Reads a bundle written by [`ArtifactBundle::write`].
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(MANIFEST_FILE);
        let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
        let manifest: Manifest =
            serde_json::from_reader(file).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))?;
        if manifest.artifact_version != ARTIFACT_VERSION {
            return Err(HarnessError::Format(format!("unsupported artifact version {}", manifest.artifact_version)));
        }
        let config = ExperimentConfig::load(&dir.join(REPLAY_FILE))?;
        let mut tables = Vec::with_capacity(manifest.tables.len());
        for entry in &manifest.tables {
            let path = dir.join(&entry.file);
            let file = File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
            let (table, prov) = match manifest.format {
                OutputFormat::Csv => Table::read_csv(file, &entry.name)?,
                OutputFormat::Json => Table::read_json(file)?,
            };
            if prov.config_hash != manifest.config_hash {
                return Err(HarnessError::Format(format!("{} belongs to a different run", path.display())));
            }
            tables.push(table);
        }
        let summary_path = dir.join(SUMMARY_FILE);
        let summary = match File::open(&summary_path) {
            Ok(f) => serde_json::from_reader(f).map_err(|e| HarnessError::Format(e.to_string()))?,
            Err(_) => Map::new(),
        };
        Ok(Self { kind: manifest.kind, config, tables, plots: manifest.plots, summary })
    }
}

/// Runs `cfg` and writes its bundle to `dir`. When the run fails, whatever
/// finished is still written, together with `failure.json`.
pub fn run_and_persist(cfg: &ExperimentConfig, dir: &Path) -> Result<ArtifactBundle, HarnessError> {
    match execute(cfg) {
        Ok(bundle) => {
            bundle.write(dir)?;
            Ok(bundle)
        }
        Err(failure) => {
            let failure = *failure;
            if !matches!(failure.error, HarnessError::Config(_) | HarnessError::Usage(_)) {
                failure.partial.write(dir)?;
                let (realization, time) = match &failure.error {
                    HarnessError::Numerical { realization, time, .. } => (*realization, *time),
                    _ => (None, None),
                };
                write_json(
                    &dir.join(FAILURE_FILE),
                    &json!({"error": failure.error.to_string(), "exit_code": failure.error.exit_code(),
                            "realization": realization, "time_j": time}),
                )?;
            }
            Err(failure.error)
        }
    }
}
