use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::rng::{unit_closed, SeedRecord};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    HardWall,
    Periodic,
}

/// Reference frame of the on-site energies. In the rotating frame the diagonal
/// holds detunings `ω_j − ω̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    #[default]
    Rotating,
}

/// Abstract disordered chain. Frequencies and couplings share one unit; the
/// experiment presets use `J = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub mean_frequency: f64,
    pub disorder: f64,
    pub coupling: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainWarning {
    /// Disorder weaker than the hopping.
    DisorderBelowCoupling { disorder: f64, coupling: f64 },
    /// Disorder above one percent of the mean frequency (lab frame only).
    DisorderTooLarge { disorder: f64, mean_frequency: f64 },
}

impl ChainSpec {
    pub fn new(n_sites: usize, disorder: f64, coupling: f64) -> Self {
        Self {
            n_sites,
            mean_frequency: 0.0,
            disorder,
            coupling,
            boundary: Boundary::HardWall,
            frame: Frame::Rotating,
        }
    }

    /// Checks hard invariants and returns soft validity warnings.
    pub fn validate(&self) -> Result<Vec<ChainWarning>, ModelError> {
        if self.n_sites == 0 {
            return Err(ModelError::InvalidChain("n_sites must be at least 1".into()));
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            return Err(ModelError::InvalidChain(format!("disorder must be >= 0, got {}", self.disorder)));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(ModelError::InvalidChain(format!("coupling must be >= 0, got {}", self.coupling)));
        }
        if !self.mean_frequency.is_finite() {
            return Err(ModelError::InvalidChain("mean_frequency must be finite".into()));
        }
        let mut warnings = Vec::new();
        if self.disorder < self.coupling {
            warnings.push(ChainWarning::DisorderBelowCoupling {
                disorder: self.disorder,
                coupling: self.coupling,
            });
        }
        if self.frame == Frame::Lab && self.disorder > 1e-2 * self.mean_frequency {
            warnings.push(ChainWarning::DisorderTooLarge {
                disorder: self.disorder,
                mean_frequency: self.mean_frequency,
            });
        }
        Ok(warnings)
    }

    /// Zero-based index of the central site.
    pub fn center(&self) -> usize {
        self.n_sites / 2
    }
}

/// One sampled vector of absolute site frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub frequencies: Vec<f64>,
    pub mean_frequency: f64,
    pub disorder: f64,
    pub seed: SeedRecord,
}

impl DisorderRealization {
    pub fn n_sites(&self) -> usize {
        self.frequencies.len()
    }

    /// On-site energies in the requested frame.
    pub fn onsite(&self, frame: Frame) -> Vec<f64> {
        match frame {
            Frame::Lab => self.frequencies.clone(),
            Frame::Rotating => self.frequencies.iter().map(|w| w - self.mean_frequency).collect(),
        }
    }

    /// Writes `site_index,omega` rows (site indices start at 1) after a comment
    /// line carrying the seed record.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), ModelError> {
        writeln!(
            out,
            "# master_seed={} index={} mean_frequency={} disorder={}",
            self.seed.master_seed, self.seed.index, self.mean_frequency, self.disorder
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["site_index", "omega"])?;
        for (j, omega) in self.frequencies.iter().enumerate() {
            w.write_record([(j + 1).to_string(), omega.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, ModelError> {
        let mut text = String::new();
        let mut input = input;
        input.read_to_string(&mut text)?;
        let mut seed = SeedRecord::new(0, 0);
        let mut mean_frequency = 0.0;
        let mut disorder = 0.0;
        if let Some(header) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
            for field in header.split_whitespace() {
                let Some((key, value)) = field.split_once('=') else { continue };
                match key {
                    "master_seed" => seed.master_seed = parse_field(field, value)?,
                    "index" => seed.index = parse_field(field, value)?,
                    "mean_frequency" => mean_frequency = parse_field(field, value)?,
                    "disorder" => disorder = parse_field(field, value)?,
                    _ => {}
                }
            }
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut frequencies = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            let site: usize = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ModelError::Format(format!("row {row}: bad site_index")))?;
            if site != row + 1 {
                return Err(ModelError::Format(format!("row {row}: site_index {site} out of order")));
            }
            let omega: f64 = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ModelError::Format(format!("row {row}: bad omega")))?;
            frequencies.push(omega);
        }
        if frequencies.is_empty() {
            return Err(ModelError::Format("realization has no sites".into()));
        }
        Ok(Self { frequencies, mean_frequency, disorder, seed })
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, value: &str) -> Result<T, ModelError> {
    value.parse().map_err(|_| ModelError::Format(format!("bad header field {field}")))
}

/// Draws `ω_j` i.i.d. uniform on `[ω̄ − Δ, ω̄ + Δ]` from the stream of
/// `(master_seed, index)`.
pub fn sample_disorder(spec: &ChainSpec, master_seed: u64, index: u64) -> DisorderRealization {
    let seed = SeedRecord::new(master_seed, index);
    let mut rng = seed.stream();
    let lo = spec.mean_frequency - spec.disorder;
    let hi = spec.mean_frequency + spec.disorder;
    let frequencies = (0..spec.n_sites)
        .map(|_| {
            if spec.disorder == 0.0 {
                spec.mean_frequency
            } else {
                (lo + 2.0 * spec.disorder * unit_closed(&mut rng)).clamp(lo, hi)
            }
        })
        .collect();
    DisorderRealization {
        frequencies,
        mean_frequency: spec.mean_frequency,
        disorder: spec.disorder,
        seed,
    }
}

/// A realization without disorder.
pub fn uniform_realization(spec: &ChainSpec) -> DisorderRealization {
    DisorderRealization {
        frequencies: vec![spec.mean_frequency; spec.n_sites],
        mean_frequency: spec.mean_frequency,
        disorder: 0.0,
        seed: SeedRecord::new(0, 0),
    }
}
