//! Open-system dynamics: the thermal master equation on a truncated Fock
//! space, the exact second-moment equations, and the observables derived from
//! both.

mod density;
pub mod integrator;
mod lindblad;
pub mod moments;

use std::sync::Arc;

use thiserror::Error;

use crate::closed::site_moments;
use crate::model::{build_fock_basis, CsrMatrix, FockBasis, FockCutoffs, ModelError};

pub use density::{
    read_snapshot, write_snapshot, DensityMatrix, HERMITICITY_TOLERANCE, POSITIVITY_TOLERANCE, SNAPSHOT_VERSION,
    TRACE_TOLERANCE,
};
pub use integrator::{IntegrationFailure, IntegrationStats, IntegratorOptions, Method};
pub use lindblad::{lindblad_rhs, BathSpec, LindbladGenerator};
pub use moments::{
    moment_populations, propagate_moments, single_excitation_moments, spectral_moments,
    spectral_single_excitation_populations, MomentGenerator,
};

#[derive(Debug, Error)]
pub enum OpenError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid bath: {0}")]
    InvalidBath(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Integration(#[from] IntegrationFailure),
    #[error("integrity violation at t = {time}: {what} = {value:e}")]
    Integrity { time: f64, what: &'static str, value: f64 },
    #[error("site populations sum to zero; the distribution is undefined")]
    UndefinedDistribution,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("need at least two truncation levels")]
    TooFewLevels,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Trace-drift limit enforced on every output time.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Hermiticity limit enforced on every output time.
pub const HERMITICITY_LIMIT: f64 = 1e-9;

/// Per-site populations over time plus the derived spread statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableTrace {
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    /// Mean site index (1 based) of the normalised distribution, NaN when the
    /// total population vanishes.
    pub n_av: Vec<f64>,
    pub delta_n: Vec<f64>,
}

impl ObservableTrace {
    pub fn push(&mut self, time: f64, populations: Vec<f64>) {
        let total: f64 = populations.iter().sum();
        let (n_av, dn) = normalized_moments(&populations).unwrap_or((f64::NAN, f64::NAN));
        self.times.push(time);
        self.populations.push(populations);
        self.total.push(total);
        self.n_av.push(n_av);
        self.delta_n.push(dn);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn normalized_moments(pops: &[f64]) -> Option<(f64, f64)> {
    let total: f64 = pops.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let p: Vec<f64> = pops.iter().map(|x| x / total).collect();
    Some(site_moments(&p))
}

/// `Δn(t)` of the normalised site distribution at each recorded time.
pub fn dispersion_series(trace: &ObservableTrace) -> Result<Vec<f64>, OpenError> {
    trace
        .populations
        .iter()
        .map(|p| normalized_moments(p).map(|m| m.1).ok_or(OpenError::UndefinedDistribution))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterOptions {
    pub integrator: IntegratorOptions,
    /// Number of output times (evenly spread, always including the last) at
    /// which the smallest eigenvalue of `ρ` is checked.
    pub positivity_checks: usize,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self { integrator: IntegratorOptions::default(), positivity_checks: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrityReport {
    pub max_trace_drift: f64,
    pub max_hermiticity_error: f64,
    /// `+∞` when no positivity checkpoint ran.
    pub min_eigenvalue: f64,
    pub positivity_checks: usize,
}

impl Default for IntegrityReport {
    fn default() -> Self {
        Self { max_trace_drift: 0.0, max_hermiticity_error: 0.0, min_eigenvalue: f64::INFINITY, positivity_checks: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct MasterRun {
    pub trace: ObservableTrace,
    pub integrity: IntegrityReport,
    pub stats: IntegrationStats,
    pub final_state: DensityMatrix,
}

fn positivity_indices(n_times: usize, checks: usize) -> Vec<usize> {
    if n_times == 0 || checks == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (1..=checks).map(|k| (k * n_times).div_ceil(checks) - 1).collect();
    idx.dedup();
    idx
}

/// Propagates `ρ₀` from `t = 0` through `times`, checking trace, Hermiticity
/// and (at checkpoints) positivity, and calling `observer` with each state.
pub fn propagate_master_with<O>(
    generator: &LindbladGenerator,
    rho0: &DensityMatrix,
    times: &[f64],
    options: &MasterOptions,
    mut observer: O,
) -> Result<MasterRun, OpenError>
where
    O: FnMut(usize, f64, &DensityMatrix) -> Result<(), OpenError>,
{
    let d = generator.dim();
    if rho0.dim() != d || rho0.basis.cutoffs() != generator.basis().cutoffs() {
        return Err(OpenError::Dimension { expected: d, got: rho0.dim() });
    }
    let checkpoints = positivity_indices(times.len(), options.positivity_checks);
    let mut trace = ObservableTrace::default();
    let mut report = IntegrityReport::default();
    let mut scratch = rho0.clone();
    let mut y = rho0.data.as_slice().to_vec();
    let stats = integrator::integrate(
        |_, rho, out| generator.apply(rho, out),
        0.0,
        &mut y,
        times,
        &options.integrator,
        |idx, t, rho| {
            scratch.data.as_mut_slice().copy_from_slice(rho);
            let drift = (scratch.trace() - 1.0).abs();
            report.max_trace_drift = report.max_trace_drift.max(drift);
            if drift > TRACE_DRIFT_LIMIT {
                return Err(OpenError::Integrity { time: t, what: "trace drift", value: drift });
            }
            let herm = density::hermiticity_error(rho, d);
            report.max_hermiticity_error = report.max_hermiticity_error.max(herm);
            if herm > HERMITICITY_LIMIT {
                return Err(OpenError::Integrity { time: t, what: "Hermiticity error", value: herm });
            }
            if checkpoints.binary_search(&idx).is_ok() {
                let min_eig = scratch.min_eigenvalue();
                report.min_eigenvalue = report.min_eigenvalue.min(min_eig);
                report.positivity_checks += 1;
                if min_eig < -POSITIVITY_TOLERANCE {
                    return Err(OpenError::Integrity { time: t, what: "minimum eigenvalue", value: min_eig });
                }
            }
            trace.push(t, scratch.populations());
            observer(idx, t, &scratch)
        },
    )
    .map_err(|e| match e {
        integrator::IntegrateError::Failure(f) => OpenError::Integration(f),
        integrator::IntegrateError::Observer(e) => e,
    })?;
    scratch.data.as_mut_slice().copy_from_slice(&y);
    Ok(MasterRun { trace, integrity: report, stats, final_state: scratch })
}

/// [`propagate_master_with`] without an observer.
pub fn propagate_master(
    generator: &LindbladGenerator,
    rho0: &DensityMatrix,
    times: &[f64],
    options: &MasterOptions,
) -> Result<MasterRun, OpenError> {
    propagate_master_with(generator, rho0, times, options, |_, _, _| Ok(()))
}

/// Population trace from the exact moment equations for one quantum started on
/// `initial_site`. With `integrator` unset the closed form is used, which needs
/// uniform damping.
pub fn moment_trace(
    h: &crate::model::SiteHamiltonian,
    bath: &BathSpec,
    initial_site: usize,
    times: &[f64],
    integrator: Option<&IntegratorOptions>,
) -> Result<ObservableTrace, OpenError> {
    let c0 = single_excitation_moments(h.n_sites(), initial_site);
    let cs = match integrator {
        Some(opts) => propagate_moments(h, bath, &c0, times, opts)?,
        None => spectral_moments(h, bath, &c0, times)?,
    };
    let mut trace = ObservableTrace::default();
    for (&t, c) in times.iter().zip(&cs) {
        trace.push(t, moment_populations(c));
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<FockCutoffs>,
    /// Largest observable change between level `k` and `k + 1`.
    pub deviations: Vec<f64>,
    pub monotone: bool,
}

/// Reruns the same propagation at each `(n_max, K)` cutoff pair and reports
/// the largest change of `observable` between successive levels.
#[allow(clippy::too_many_arguments)]
pub fn truncation_convergence<B, I, O>(
    n_sites: usize,
    build_h: B,
    bath: &BathSpec,
    initial: I,
    observable: O,
    cutoffs: &[(u8, u8)],
    times: &[f64],
    options: &MasterOptions,
) -> Result<ConvergenceReport, OpenError>
where
    B: Fn(&FockBasis) -> CsrMatrix,
    I: Fn(Arc<FockBasis>) -> DensityMatrix,
    O: Fn(&ObservableTrace) -> Vec<f64>,
{
    if cutoffs.len() < 2 {
        return Err(OpenError::TooFewLevels);
    }
    let mut levels = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for &(n_max, k) in cutoffs {
        let basis = Arc::new(build_fock_basis(n_sites, n_max, k)?);
        let generator = LindbladGenerator::new(build_h(&basis), basis.clone(), bath.clone())?;
        let run = propagate_master(&generator, &initial(basis.clone()), times, options)?;
        levels.push(basis.cutoffs());
        values.push(observable(&run.trace));
    }
    let deviations: Vec<f64> = values
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect();
    let monotone = deviations.windows(2).all(|w| w[1] <= w[0]);
    Ok(ConvergenceReport { levels, deviations, monotone })
}

/// Flattens every population of a trace, time-major.
pub fn all_populations(trace: &ObservableTrace) -> Vec<f64> {
    trace.populations.iter().flatten().copied().collect()
}
