use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::model::{Boundary, Frame};
use crate::open::{IntegratorOptions, Method};

/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 2024;
/// Realizations per ensemble when none is given.
pub const DEFAULT_REALIZATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Table1,
    Fig2Dispersion,
    Fig3Profiles,
    Fig4Thermal,
    Fig5_6Concurrence,
    Fig7Ctqw,
    Custom,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Table1 => "table1",
            Self::Fig2Dispersion => "fig2_dispersion",
            Self::Fig3Profiles => "fig3_profiles",
            Self::Fig4Thermal => "fig4_thermal",
            Self::Fig5_6Concurrence => "fig5_6_concurrence",
            Self::Fig7Ctqw => "fig7_ctqw",
            Self::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "table1" => Self::Table1,
            "fig2" | "fig2_dispersion" => Self::Fig2Dispersion,
            "fig3" | "fig3_profiles" => Self::Fig3Profiles,
            "fig4" | "fig4_thermal" => Self::Fig4Thermal,
            "fig5" | "fig6" | "fig5_6_concurrence" => Self::Fig5_6Concurrence,
            "fig7" | "fig7_ctqw" => Self::Fig7Ctqw,
            "custom" => Self::Custom,
            other => return Err(HarnessError::Usage(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// Chain settings shared by every point of a sweep. Energies are in units of
/// the coupling `J`, which is fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default)]
    pub mean_frequency: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub frame: Frame,
}

fn one() -> f64 {
    1.0
}

/// Parameter lists swept by an experiment. Empty lists fall back to the chain
/// section (sizes) or to a single clean chain (disorder).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub n_sites: Vec<usize>,
    #[serde(default)]
    pub disorder: Vec<f64>,
    #[serde(default)]
    pub nbar: Vec<f64>,
}

/// How a damping rate is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "convention", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    /// Ratio `γ/J`.
    OverCoupling { gamma_over_j: f64 },
    /// `γ` in s⁻¹ together with an assumed `J/2π` in Hz.
    Physical { gamma_per_s: f64, coupling_over_2pi_hz: f64 },
}

impl RateSpec {
    pub fn gamma_over_j(&self) -> f64 {
        match *self {
            RateSpec::OverCoupling { gamma_over_j } => gamma_over_j,
            RateSpec::Physical { gamma_per_s, coupling_over_2pi_hz } => {
                gamma_per_s / (2.0 * std::f64::consts::PI * coupling_over_2pi_hz)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    pub rate: RateSpec,
    /// Used when the sweep has no `nbar` list.
    #[serde(default)]
    pub nbar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// One quantum on site `N/2` (zero based).
    #[default]
    CentralExcitation,
    /// One quantum on the given zero-based site.
    Site { index: usize },
}

impl InitialCondition {
    pub fn site(&self, n_sites: usize) -> usize {
        match *self {
            InitialCondition::CentralExcitation => n_sites / 2,
            InitialCondition::Site { index } => index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn new(stop: f64, step: f64) -> Self {
        Self { start: 0.0, stop, step }
    }

    pub fn times(&self) -> Vec<f64> {
        if !(self.step > 0.0) || self.stop < self.start {
            return Vec::new();
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Which propagation computes site populations of an open chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopulationMethod {
    /// Exact second-moment equations (no truncation).
    #[default]
    Moments,
    /// Master equation on the truncated Fock space.
    Fock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub population_method: PopulationMethod,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorOptions,
    #[serde(default = "two")]
    pub n_max: u8,
    #[serde(default = "two")]
    pub max_total: u8,
    #[serde(default = "three")]
    pub positivity_checks: usize,
    /// Samples before this time are left out of time averages.
    #[serde(default)]
    pub transient: f64,
    /// Times at which single profiles are reported.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_integrator() -> IntegratorOptions {
    IntegratorOptions::default()
}

fn two() -> u8 {
    2
}

fn three() -> usize {
    3
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            population_method: PopulationMethod::default(),
            integrator: default_integrator(),
            n_max: 2,
            max_total: 2,
            positivity_checks: 3,
            transient: 0.0,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(HarnessError::Usage(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    /// Worker threads; 0 uses every available core. Results do not depend on it.
    #[serde(default)]
    pub workers: usize,
    pub chain: ChainConfig,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub bath: Option<BathConfig>,
    #[serde(default)]
    pub initial: InitialCondition,
    pub time: TimeGrid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_realizations() -> usize {
    DEFAULT_REALIZATIONS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.chain.n_sites == 0 && self.sweep.n_sites.is_empty() {
            return bad("chain needs at least one site".into());
        }
        if self.sweep.n_sites.contains(&0) {
            return bad("swept chain sizes must be positive".into());
        }
        if let Some(d) = self.sweep.disorder.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return bad(format!("disorder {d} must be finite and non-negative"));
        }
        if let Some(n) = self.sweep.nbar.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
            return bad(format!("thermal occupation {n} must be finite and non-negative"));
        }
        if !(self.time.step > 0.0 && self.time.stop >= self.time.start && self.time.start >= 0.0) {
            return bad("time grid needs 0 <= start <= stop and a positive step".into());
        }
        if let Some(b) = &self.bath {
            let g = b.rate.gamma_over_j();
            if !(g.is_finite() && g >= 0.0) {
                return bad(format!("damping rate {g} must be finite and non-negative"));
            }
        }
        if let Method::Rk4 { step } = self.solver.integrator.method {
            if !(step > 0.0) {
                return bad("fixed integrator step must be positive".into());
            }
        }
        if let InitialCondition::Site { index } = self.initial {
            for &n in self.sizes().iter() {
                if index >= n {
                    return bad(format!("initial site {index} outside a chain of {n}"));
                }
            }
        }
        Ok(())
    }

    /// Chain sizes visited by the experiment.
    pub fn sizes(&self) -> Vec<usize> {
        if self.sweep.n_sites.is_empty() {
            vec![self.chain.n_sites]
        } else {
            self.sweep.n_sites.clone()
        }
    }

    /// Disorder widths `Δ/J` visited by the experiment.
    pub fn disorders(&self) -> Vec<f64> {
        if self.sweep.disorder.is_empty() {
            vec![0.0]
        } else {
            self.sweep.disorder.clone()
        }
    }

    /// Thermal occupations visited by the experiment.
    pub fn nbars(&self) -> Vec<f64> {
        match (&self.bath, self.sweep.nbar.is_empty()) {
            (_, false) => self.sweep.nbar.clone(),
            (Some(b), true) => vec![b.nbar],
            (None, true) => Vec::new(),
        }
    }

    pub fn gamma_over_j(&self) -> Option<f64> {
        self.bath.as_ref().map(|b| b.rate.gamma_over_j())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// SHA-256 over the canonical JSON form, hex encoded. Output location and
    /// worker count are excluded since they do not affect results.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.workers = 0;
        canonical.format = OutputFormat::Csv;
        let json = serde_json::to_string(&canonical).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
