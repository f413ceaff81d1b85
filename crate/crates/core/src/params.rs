//! Device-level parameters of a capacitively coupled nanoresonator array and
//! the model rates derived from them.
//!
//! All frequencies are angular (rad/s). Inputs read from configuration files
//! are ordinary frequencies (Hz) and are converted on load.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant (J s), CODATA 2018.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m), CODATA 2018.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Effective-mass prefactor of the third in-plane flexural mode.
pub const MODE_MASS_FACTOR: f64 = 0.52;

/// Above this ratio of zero-point amplitude to gap the quadratic expansion of
/// the electrostatic energy is no longer trustworthy.
const SMALL_OSCILLATION_RATIO: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{name} must be strictly positive and finite, got {value}")]
    Domain { name: &'static str, value: f64 },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("failed to parse device file: {0}")]
    Parse(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, ParamsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamsError::Domain { name, value })
    }
}

/// How the electrostatic coupling between neighbours is converted into a
/// hopping rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transduction {
    /// `ε₀ A ΔV² x_j x_{j+1} / (2 d³ ħ)`, requires the plate area.
    ParallelPlate,
    /// `(dC/dx) ΔV² x_j x_{j+1} / (d ħ)`, requires the capacitance gradient.
    CapacitanceGradient,
}

/// Physical constants of one resonator and its couplers, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub density: f64,
    /// Bare mechanical angular frequency ν (rad/s).
    pub bare_frequency: f64,
    /// Parallel-plate area. Never defaulted.
    pub plate_area: Option<f64>,
    pub gap: f64,
    pub voltage: f64,
    pub coupling_capacitance: f64,
    pub capacitance_gradient: Option<f64>,
    pub transmon_shunt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidityWarning {
    /// `x_zpf / d` exceeds the small-oscillation bound.
    LargeZeroPointAmplitude { ratio: f64 },
    /// Coupling is not small compared with the mode frequency.
    StrongCoupling { ratio: f64 },
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        positive("length", self.length)?;
        positive("width", self.width)?;
        positive("thickness", self.thickness)?;
        positive("density", self.density)?;
        positive("bare_frequency", self.bare_frequency)?;
        if let Some(a) = self.plate_area {
            positive("plate_area", a)?;
        }
        positive("gap", self.gap)?;
        positive("voltage", self.voltage)?;
        positive("coupling_capacitance", self.coupling_capacitance)?;
        if let Some(g) = self.capacitance_gradient {
            positive("capacitance_gradient", g)?;
        }
        positive("transmon_shunt", self.transmon_shunt)?;
        Ok(())
    }

    pub fn mass(&self) -> Result<f64, ParamsError> {
        effective_mass(self.density, self.width, self.thickness, self.length)
    }

    pub fn zero_point_fluctuation(&self) -> Result<f64, ParamsError> {
        zero_point_fluctuation(self.mass()?, self.bare_frequency)
    }

    /// Returns a copy with a different bias voltage.
    pub fn with_voltage(&self, voltage: f64) -> Self {
        Self { voltage, ..self.clone() }
    }

    /// Electrostatic spring factor `ε₀A/d³` (parallel plate) or `(dC/dx)/d`
    /// (capacitance gradient), in F/m².
    fn spring_factor(&self, mode: Transduction) -> Result<f64, ParamsError> {
        match mode {
            Transduction::ParallelPlate => {
                let area = self.plate_area.ok_or_else(|| {
                    ParamsError::Configuration("parallel-plate transduction needs plate_area".into())
                })?;
                Ok(EPSILON_0 * area / self.gap.powi(3))
            }
            Transduction::CapacitanceGradient => {
                let grad = self.capacitance_gradient.ok_or_else(|| {
                    ParamsError::Configuration(
                        "capacitance-gradient transduction needs capacitance_gradient".into(),
                    )
                })?;
                Ok(grad / self.gap)
            }
        }
    }
}

/// `0.52 ρ w t L`.
pub fn effective_mass(density: f64, width: f64, thickness: f64, length: f64) -> Result<f64, ParamsError> {
    Ok(MODE_MASS_FACTOR
        * positive("density", density)?
        * positive("width", width)?
        * positive("thickness", thickness)?
        * positive("length", length)?)
}

/// `√(ħ / 2mω)`.
pub fn zero_point_fluctuation(mass: f64, omega: f64) -> Result<f64, ParamsError> {
    let m = positive("mass", mass)?;
    let w = positive("omega", omega)?;
    Ok((HBAR / (2.0 * m * w)).sqrt())
}

/// Nearest-neighbour hopping rate (rad/s) between resonators `j` and `j+1`.
///
/// Gap and bias voltage describe the shared coupler, so both devices must agree
/// on them. A zero voltage is accepted here and yields exactly zero coupling.
pub fn coupling_rate(
    dev_j: &DeviceParams,
    dev_next: &DeviceParams,
    mode: Transduction,
) -> Result<f64, ParamsError> {
    if dev_j.gap != dev_next.gap || dev_j.voltage != dev_next.voltage {
        return Err(ParamsError::Configuration(
            "coupled resonators must share gap and voltage".into(),
        ));
    }
    if !(dev_j.voltage.is_finite() && dev_j.voltage >= 0.0) {
        return Err(ParamsError::Domain { name: "voltage", value: dev_j.voltage });
    }
    let x_j = dev_j.zero_point_fluctuation()?;
    let x_next = dev_next.zero_point_fluctuation()?;
    let dv2 = dev_j.voltage * dev_j.voltage;
    let factor = dev_j.spring_factor(mode)?;
    let g = match mode {
        Transduction::ParallelPlate => factor * dv2 * x_j * x_next / (2.0 * HBAR),
        Transduction::CapacitanceGradient => factor * dv2 * x_j * x_next / HBAR,
    };
    Ok(g)
}

/// Mode frequency renormalised by the electrostatic spring,
/// `ν + k_e ΔV² / (2 m ν)` with `k_e` the spring factor of `mode`.
pub fn rescaled_frequency(dev: &DeviceParams, mode: Transduction) -> Result<f64, ParamsError> {
    let nu = positive("bare_frequency", dev.bare_frequency)?;
    let m = dev.mass()?;
    let shift = dev.spring_factor(mode)? * dev.voltage * dev.voltage / (2.0 * m * nu);
    Ok(nu + shift)
}

/// Transmon-resonator coupling `λ = ω √((dC/dx) C ΔV² / (m ω² d C_Q))`, on
/// resonance with the bare mode.
pub fn transmon_coupling(dev: &DeviceParams) -> Result<f64, ParamsError> {
    dev.validate()?;
    let grad = dev.capacitance_gradient.ok_or_else(|| {
        ParamsError::Configuration("transmon coupling needs capacitance_gradient".into())
    })?;
    let w = dev.bare_frequency;
    let m = dev.mass()?;
    let inner = grad * dev.coupling_capacitance * dev.voltage * dev.voltage
        / (m * w * w * dev.gap * dev.transmon_shunt);
    Ok(w * inner.sqrt())
}

/// Half a Rabi cycle, `π / 2λ`.
pub fn rabi_transfer_time(lambda: f64) -> Result<f64, ParamsError> {
    Ok(PI / (2.0 * positive("lambda", lambda)?))
}

/// Everything the chain model needs from one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub effective_mass: f64,
    pub x_zpf: f64,
    pub coupling_g: f64,
    pub rescaled_frequency: f64,
    pub transmon_lambda: f64,
    pub rabi_time: f64,
    pub warnings: Vec<ValidityWarning>,
}

impl DerivedRates {
    /// Rates for a uniform array built from identical copies of `dev`.
    pub fn from_device(dev: &DeviceParams, mode: Transduction) -> Result<Self, ParamsError> {
        dev.validate()?;
        let effective_mass = dev.mass()?;
        let x_zpf = dev.zero_point_fluctuation()?;
        let coupling_g = coupling_rate(dev, dev, mode)?;
        let rescaled = rescaled_frequency(dev, mode)?;
        let transmon_lambda = transmon_coupling(dev)?;
        let rabi_time = rabi_transfer_time(transmon_lambda)?;

        let mut warnings = Vec::new();
        let ratio = x_zpf / dev.gap;
        if ratio > SMALL_OSCILLATION_RATIO {
            log::warn!("x_zpf/d = {ratio:.3e} violates the small-oscillation assumption");
            warnings.push(ValidityWarning::LargeZeroPointAmplitude { ratio });
        }
        let ratio = coupling_g / rescaled;
        if ratio > 1e-2 {
            log::warn!("g/ω = {ratio:.3e}: rotating-wave approximation is doubtful");
            warnings.push(ValidityWarning::StrongCoupling { ratio });
        }
        Ok(Self {
            effective_mass,
            x_zpf,
            coupling_g,
            rescaled_frequency: rescaled,
            transmon_lambda,
            rabi_time,
            warnings,
        })
    }
}

/// Human-editable device description. Frequencies are in Hz (ν/2π).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceFile {
    pub resonator: ResonatorSection,
    pub coupling: CouplingSection,
    pub transmon: TransmonSection,
    #[serde(default)]
    pub transduction: Option<Transduction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub length_m: f64,
    pub width_m: f64,
    pub thickness_m: f64,
    pub density_kg_m3: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub gap_m: f64,
    pub voltage_v: f64,
    pub capacitance_f: f64,
    #[serde(default)]
    pub capacitance_gradient_f_per_m: Option<f64>,
    #[serde(default)]
    pub plate_area_m2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonSection {
    pub shunt_capacitance_f: f64,
}

impl DeviceFile {
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        toml::from_str(text).map_err(|e| ParamsError::Parse(e.to_string()))
    }

    pub fn to_params(&self) -> Result<DeviceParams, ParamsError> {
        let dev = DeviceParams {
            length: self.resonator.length_m,
            width: self.resonator.width_m,
            thickness: self.resonator.thickness_m,
            density: self.resonator.density_kg_m3,
            bare_frequency: 2.0 * PI * self.resonator.frequency_hz,
            plate_area: self.coupling.plate_area_m2,
            gap: self.coupling.gap_m,
            voltage: self.coupling.voltage_v,
            coupling_capacitance: self.coupling.capacitance_f,
            capacitance_gradient: self.coupling.capacitance_gradient_f_per_m,
            transmon_shunt: self.transmon.shunt_capacitance_f,
        };
        dev.validate()?;
        Ok(dev)
    }
}

/// Aluminium beam used for the reference table.
pub const ALUMINIUM_DENSITY: f64 = 2700.0;

/// Reference device at the given mode frequency (Hz), beam length and voltage.
pub fn reference_device(frequency_hz: f64, length: f64, voltage: f64) -> DeviceParams {
    DeviceParams {
        length,
        width: 45e-9,
        thickness: 50e-9,
        density: ALUMINIUM_DENSITY,
        bare_frequency: 2.0 * PI * frequency_hz,
        plate_area: None,
        gap: 20e-9,
        voltage,
        coupling_capacitance: 20e-18,
        capacitance_gradient: Some(6e-11),
        transmon_shunt: 50e-15,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub omega_over_2pi_ghz: f64,
    pub dv_v: f64,
    pub lambda_over_2pi_mhz: f64,
    pub j_over_2pi_mhz: f64,
}

/// The transmon coupling and hopping estimates for the two reference beams
/// (0.7 µm at 2.5 GHz, 0.6 µm at 3.5 GHz) at 10 V and 20 V bias.
pub fn table1() -> Result<Vec<Table1Row>, ParamsError> {
    let beams = [(2.5e9, 0.7e-6), (3.5e9, 0.6e-6)];
    let mut rows = Vec::with_capacity(4);
    for (freq, length) in beams {
        for dv in [10.0, 20.0] {
            let dev = reference_device(freq, length, dv);
            rows.push(table1_row(&dev)?);
        }
    }
    Ok(rows)
}

pub fn table1_row(dev: &DeviceParams) -> Result<Table1Row, ParamsError> {
    let lambda = transmon_coupling(dev)?;
    let j = coupling_rate(dev, dev, Transduction::CapacitanceGradient)?;
    Ok(Table1Row {
        omega_over_2pi_ghz: dev.bare_frequency / (2.0 * PI) / 1e9,
        dv_v: dev.voltage,
        lambda_over_2pi_mhz: lambda / (2.0 * PI) / 1e6,
        j_over_2pi_mhz: j / (2.0 * PI) / 1e6,
    })
}
