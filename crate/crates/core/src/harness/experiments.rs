use std::sync::Arc;

use serde_json::{json, Map, Value};

use super::bundle::{ArtifactBundle, PlotSpec};
use super::config::*;
use super::ensemble::{run_ensemble, EnsembleOutcome, EnsembleStats, RealizationFailure};
use super::table::Table;
use super::HarnessError;
use crate::closed::{
    fit_spread, ground_state_dispersion, localization_length_fit, site_moments, FitOptions, PopulationProfile,
    PureState, UnitaryPropagator,
};
use crate::entanglement::{ConcurrenceMap, StateRef};
use crate::model::{
    build_fock_basis_with_budget, build_fock_hamiltonian, build_single_excitation_h, sample_disorder, ChainSpec,
    DisorderRealization, SiteHamiltonian, DEFAULT_MAX_DIMENSION,
};
use crate::open::{
    dispersion_series, moment_trace, propagate_master_with, spectral_single_excitation_populations, BathSpec,
    DensityMatrix, IntegrityReport, LindbladGenerator, MasterOptions, ObservableTrace,
};
use crate::params;

/// Rate used by the open-system presets, `γ/J = 0.05`.
pub const PRESET_GAMMA_OVER_J: f64 = 0.05;
/// `γ = 1 MHz` read as a rate of 10⁶ s⁻¹.
pub const PRESET_GAMMA_PER_S: f64 = 1e6;
/// The `J/2π` that makes `γ = 10⁶ s⁻¹` equal to `0.05 J`.
pub const PRESET_COUPLING_OVER_2PI_HZ: f64 = PRESET_GAMMA_PER_S / (2.0 * std::f64::consts::PI * PRESET_GAMMA_OVER_J);

/// Time at which the Fig. 4 ordering is read off, in units of `1/J`.
pub const FIG4_CHECK_TIME: f64 = 20.0;

fn chain(n_sites: usize) -> ChainConfig {
    ChainConfig {
        n_sites,
        coupling: 1.0,
        mean_frequency: 0.0,
        boundary: Default::default(),
        frame: Default::default(),
    }
}

fn physical_bath(nbar: f64) -> BathConfig {
    BathConfig {
        rate: RateSpec::Physical { gamma_per_s: PRESET_GAMMA_PER_S, coupling_over_2pi_hz: PRESET_COUPLING_OVER_2PI_HZ },
        nbar,
    }
}

/// Parameters of each figure. `full` switches open-system chains from 21 to
/// 51 sites.
pub fn preset(kind: ExperimentKind, full: bool) -> ExperimentConfig {
    let open_n = if full { 51 } else { 21 };
    let base = ExperimentConfig {
        kind,
        realizations: DEFAULT_REALIZATIONS,
        master_seed: DEFAULT_SEED,
        workers: 0,
        chain: chain(51),
        sweep: Sweep::default(),
        bath: None,
        initial: InitialCondition::CentralExcitation,
        time: TimeGrid::new(0.0, 1.0),
        solver: SolverConfig::default(),
        output_dir: "out".into(),
        format: OutputFormat::Csv,
    };
    match kind {
        ExperimentKind::Table1 => ExperimentConfig { realizations: 1, chain: chain(1), ..base },
        ExperimentKind::Fig2Dispersion => ExperimentConfig {
            sweep: Sweep {
                n_sites: vec![1, 2, 5, 10, 20, 30, 50, 75, 100, 150, 200, 250, 300],
                disorder: vec![2.0, 5.0, 10.0, 15.0, 20.0],
                nbar: vec![],
            },
            ..base
        },
        ExperimentKind::Fig3Profiles => ExperimentConfig {
            sweep: Sweep { n_sites: vec![open_n], disorder: vec![15.0, 2.0], nbar: vec![] },
            bath: Some(physical_bath(1e-2)),
            time: TimeGrid::new(400.0, 2.0),
            solver: SolverConfig { transient: 50.0, snapshot_times: vec![20.0, 100.0, 400.0], ..SolverConfig::default() },
            ..base
        },
        ExperimentKind::Fig4Thermal => ExperimentConfig {
            chain: chain(open_n),
            sweep: Sweep { n_sites: vec![], disorder: vec![2.0, 15.0], nbar: vec![1e-4, 1e-3, 1e-2, 1e-1] },
            bath: Some(physical_bath(1e-2)),
            time: TimeGrid::new(400.0, 1.0),
            solver: SolverConfig { snapshot_times: vec![FIG4_CHECK_TIME], ..SolverConfig::default() },
            ..base
        },
        ExperimentKind::Fig5_6Concurrence => ExperimentConfig {
            realizations: 1,
            chain: chain(open_n),
            sweep: Sweep { n_sites: vec![], disorder: vec![0.0], nbar: vec![] },
            bath: Some(BathConfig { rate: RateSpec::OverCoupling { gamma_over_j: PRESET_GAMMA_OVER_J }, nbar: 1e-2 }),
            time: TimeGrid::new(40.0, 0.2),
            solver: SolverConfig { population_method: PopulationMethod::Fock, ..SolverConfig::default() },
            ..base
        },
        ExperimentKind::Fig7Ctqw => ExperimentConfig {
            realizations: 1,
            chain: chain(101),
            sweep: Sweep { n_sites: vec![], disorder: vec![0.0], nbar: vec![] },
            time: TimeGrid::new(20.0, 0.1),
            solver: SolverConfig { snapshot_times: vec![5.0, 15.0], ..SolverConfig::default() },
            ..base
        },
        ExperimentKind::Custom => ExperimentConfig { time: TimeGrid::new(20.0, 0.5), ..base },
    }
}

/// The Fig. 6 variant of the concurrence preset (`Δ/J = 10`).
pub fn fig6_preset(full: bool) -> ExperimentConfig {
    let mut cfg = preset(ExperimentKind::Fig5_6Concurrence, full);
    cfg.sweep.disorder = vec![10.0];
    cfg
}

/// An experiment that stopped early, with whatever finished before.
#[derive(Debug)]
pub struct ExperimentFailure {
    pub error: HarnessError,
    pub partial: ArtifactBundle,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    bundle: ArtifactBundle,
}

impl Runner<'_> {
    fn spec(&self, n_sites: usize, disorder: f64) -> ChainSpec {
        ChainSpec {
            n_sites,
            mean_frequency: self.cfg.chain.mean_frequency,
            disorder,
            coupling: self.cfg.chain.coupling,
            boundary: self.cfg.chain.boundary,
            frame: self.cfg.chain.frame,
        }
    }

    fn realization(&self, spec: &ChainSpec, k: u64) -> DisorderRealization {
        sample_disorder(spec, self.cfg.master_seed, k)
    }

    fn site_h(&self, real: &DisorderRealization) -> SiteHamiltonian {
        build_single_excitation_h(real, self.cfg.chain.coupling, self.cfg.chain.boundary, self.cfg.chain.frame)
    }

    fn ensemble<T, F>(&self, f: F) -> Result<EnsembleOutcome<T>, HarnessError>
    where
        T: Send,
        F: Fn(u64) -> Result<T, RealizationFailure> + Sync,
    {
        run_ensemble(self.cfg.realizations, self.cfg.workers, f)
    }

    /// Unwraps an outcome; on failure the completed samples are kept as a
    /// partial table before the error is returned.
    fn finish<T>(
        &mut self,
        label: &str,
        outcome: EnsembleOutcome<T>,
        samples: impl Fn(&T) -> Vec<f64>,
    ) -> Result<Vec<T>, HarnessError> {
        if outcome.failure.is_some() && !outcome.completed.is_empty() {
            let flat: Vec<Vec<f64>> = outcome.completed.iter().map(|(_, v)| samples(v)).collect();
            let stats = EnsembleStats::from_samples(&flat, self.cfg.master_seed);
            let mut t = Table::new(format!("partial_{label}"), &["index", "mean", "stderr", "realizations"]);
            for (i, (m, e)) in stats.mean.iter().zip(&stats.stderr).enumerate() {
                t.push(vec![i as f64, *m, *e, stats.count as f64]);
            }
            self.bundle.tables.push(t);
        }
        outcome.into_result()
    }

    fn add_table(&mut self, table: Table) -> usize {
        self.bundle.tables.push(table);
        self.bundle.tables.len() - 1
    }

    fn table(&mut self, index: usize) -> &mut Table {
        &mut self.bundle.tables[index]
    }

    fn note(&mut self, key: &str, value: Value) {
        self.bundle.summary.insert(key.to_string(), value);
    }
}

fn numerical(k: u64, time: Option<f64>, e: impl std::fmt::Display) -> RealizationFailure {
    RealizationFailure { index: k, time, message: e.to_string() }
}

fn open_failure(k: u64, e: crate::open::OpenError) -> RealizationFailure {
    let time = match &e {
        crate::open::OpenError::Integration(f) => f.time(),
        crate::open::OpenError::Integrity { time, .. } => Some(*time),
        _ => None,
    };
    numerical(k, time, e)
}

/// Runs an experiment, keeping partial output on failure.
pub fn execute(cfg: &ExperimentConfig) -> Result<ArtifactBundle, Box<ExperimentFailure>> {
    let mut runner = Runner { cfg, bundle: ArtifactBundle::new(cfg.clone()) };
    let result = cfg.validate().and_then(|_| match cfg.kind {
        ExperimentKind::Table1 => table1(&mut runner),
        ExperimentKind::Fig2Dispersion => fig2(&mut runner),
        ExperimentKind::Fig3Profiles => fig3(&mut runner),
        ExperimentKind::Fig4Thermal => fig4(&mut runner),
        ExperimentKind::Fig5_6Concurrence => fig5_6(&mut runner),
        ExperimentKind::Fig7Ctqw => fig7(&mut runner),
        ExperimentKind::Custom => custom(&mut runner),
    });
    match result {
        Ok(()) => Ok(runner.bundle),
        Err(error) => Err(Box::new(ExperimentFailure { error, partial: runner.bundle })),
    }
}

/// Runs an experiment and returns its artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ArtifactBundle, HarnessError> {
    execute(cfg).map_err(|f| f.error)
}

fn table1(r: &mut Runner) -> Result<(), HarnessError> {
    let t = r.add_table(Table::new("table1", &["omega_over_2pi_GHz", "dV_V", "lambda_over_2pi_MHz", "J_over_2pi_MHz"]));
    let mut rabi = Vec::new();
    for row in params::table1().map_err(|e| HarnessError::Config(e.to_string()))? {
        let lambda = row.lambda_over_2pi_mhz * 1e6 * 2.0 * std::f64::consts::PI;
        let time = params::rabi_transfer_time(lambda).map_err(|e| HarnessError::Config(e.to_string()))?;
        rabi.push(time * 1e9);
        r.table(t).push(vec![row.omega_over_2pi_ghz, row.dv_v, row.lambda_over_2pi_mhz, row.j_over_2pi_mhz]);
    }
    r.note("rabi_transfer_time_ns", json!(rabi));
    Ok(())
}

fn fig2(r: &mut Runner) -> Result<(), HarnessError> {
    let t = r.add_table(Table::new(
        "fig2_dispersion",
        &["n_sites", "disorder_over_j", "relative_dispersion", "stderr", "n_av", "delta_n", "degenerate", "realizations"],
    ));
    let sizes = r.cfg.sizes();
    let disorders = r.cfg.disorders();
    let mut by_size: Map<String, Value> = Map::new();
    for &n in &sizes {
        let mut row_means = Vec::new();
        for &d in &disorders {
            let spec = r.spec(n, d);
            log::info!("{}: N = {n}, disorder/J = {d}", r.cfg.kind.name());
            let outcome = r.ensemble(|k| {
                let g = ground_state_dispersion(&r.site_h(&r.realization(&spec, k)));
                Ok([g.relative, g.n_av, g.delta_n, if g.degenerate { 1.0 } else { 0.0 }])
            })?;
            let samples = r.finish("fig2", outcome, |v| v.to_vec())?;
            let flat: Vec<Vec<f64>> = samples.iter().map(|v| v.to_vec()).collect();
            let s = EnsembleStats::from_samples(&flat, r.cfg.master_seed);
            r.table(t).push(vec![n as f64, d, s.mean[0], s.stderr[0], s.mean[1], s.mean[2], s.mean[3] * s.count as f64, s.count as f64]);
            row_means.push(json!({"disorder_over_j": d, "mean": s.mean[0], "stderr": s.stderr[0]}));
        }
        by_size.insert(n.to_string(), Value::Array(row_means));
    }
    r.note("relative_dispersion", Value::Object(by_size));
    r.bundle.plots.push(PlotSpec::Lines {
        table: "fig2_dispersion".into(),
        x: "n_sites".into(),
        y: "relative_dispersion".into(),
        group: Some("disorder_over_j".into()),
    });
    Ok(())
}

/// Open-chain population trace for one realization.
fn open_trace(
    r: &Runner,
    real: &DisorderRealization,
    bath: &BathSpec,
    times: &[f64],
) -> Result<(ObservableTrace, Option<IntegrityReport>), crate::open::OpenError> {
    let n = real.n_sites();
    let site = r.cfg.initial.site(n);
    match r.cfg.solver.population_method {
        PopulationMethod::Moments => {
            // single-particle matrix with the hopping sign of the Fock-space Hamiltonian
            let h = r.site_h(real).gauge_flipped();
            let trace = if bath.uniform_gamma().is_some() {
                let pops = spectral_single_excitation_populations(&h, bath, site, times)?;
                let mut tr = ObservableTrace::default();
                for (&t, p) in times.iter().zip(pops) {
                    tr.push(t, p);
                }
                tr
            } else {
                moment_trace(&h, bath, site, times, Some(&r.cfg.solver.integrator))?
            };
            Ok((trace, None))
        }
        PopulationMethod::Fock => {
            let run = fock_run(r, real, bath, times, |_, _, _| Ok(()))?;
            Ok((run.trace, Some(run.integrity)))
        }
    }
}

fn fock_run<O>(
    r: &Runner,
    real: &DisorderRealization,
    bath: &BathSpec,
    times: &[f64],
    observer: O,
) -> Result<crate::open::MasterRun, crate::open::OpenError>
where
    O: FnMut(usize, f64, &DensityMatrix) -> Result<(), crate::open::OpenError>,
{
    let n = real.n_sites();
    let basis =
        Arc::new(build_fock_basis_with_budget(n, r.cfg.solver.n_max, r.cfg.solver.max_total, DEFAULT_MAX_DIMENSION)?);
    let h = build_fock_hamiltonian(real, r.cfg.chain.coupling, r.cfg.chain.boundary, r.cfg.chain.frame, &basis);
    let generator = LindbladGenerator::new(h, basis.clone(), bath.clone())?;
    let rho0 = DensityMatrix::single_excitation(basis, r.cfg.initial.site(n));
    let options =
        MasterOptions { integrator: r.cfg.solver.integrator, positivity_checks: r.cfg.solver.positivity_checks };
    propagate_master_with(&generator, &rho0, times, &options, observer)
}

fn merge_integrity(acc: &mut Option<IntegrityReport>, rep: &IntegrityReport) {
    let a = acc.get_or_insert_with(IntegrityReport::default);
    a.max_trace_drift = a.max_trace_drift.max(rep.max_trace_drift);
    a.max_hermiticity_error = a.max_hermiticity_error.max(rep.max_hermiticity_error);
    a.min_eigenvalue = a.min_eigenvalue.min(rep.min_eigenvalue);
    a.positivity_checks += rep.positivity_checks;
}

fn integrity_json(rep: &Option<IntegrityReport>) -> Value {
    match rep {
        None => Value::Null,
        Some(r) => json!({
            "max_trace_drift": r.max_trace_drift,
            "max_hermiticity_error": r.max_hermiticity_error,
            "min_eigenvalue": if r.min_eigenvalue.is_finite() { json!(r.min_eigenvalue) } else { Value::Null },
            "positivity_checks": r.positivity_checks,
        }),
    }
}

fn fig3(r: &mut Runner) -> Result<(), HarnessError> {
    let times = r.cfg.time.times();
    let n_closed = r.cfg.chain.n_sites;
    let closed = r.add_table(Table::new("fig3a_closed_profile", &["disorder_over_j", "site", "population", "stderr"]));
    let mut fits = Map::new();
    let averaged: Vec<f64> = times.iter().copied().filter(|&t| t >= r.cfg.solver.transient).collect();
    for &d in &r.cfg.disorders() {
        let spec = r.spec(n_closed, d);
        log::info!("fig3 closed: N = {n_closed}, disorder/J = {d}");
        let center = r.cfg.initial.site(n_closed);
        let outcome = r.ensemble(|k| {
            let prop = UnitaryPropagator::from_site_hamiltonian(&r.site_h(&r.realization(&spec, k)));
            let states =
                prop.evolve(&PureState::localized(n_closed, center), &averaged).map_err(|e| numerical(k, None, e))?;
            let mut acc = vec![0.0; n_closed];
            let mut worst_norm = 0.0f64;
            for s in &states {
                worst_norm = worst_norm.max((s.norm() - 1.0).abs());
                for (a, p) in acc.iter_mut().zip(s.populations()) {
                    *a += p;
                }
            }
            acc.iter_mut().for_each(|a| *a /= states.len().max(1) as f64);
            acc.push(worst_norm);
            Ok(acc)
        })?;
        let samples = r.finish("fig3a", outcome, |v| v.clone())?;
        let s = EnsembleStats::from_samples(&samples, r.cfg.master_seed);
        for j in 0..n_closed {
            r.table(closed).push(vec![d, (j + 1) as f64, s.mean[j], s.stderr[j]]);
        }
        let profile = PopulationProfile::new(f64::NAN, s.mean[..n_closed].to_vec());
        let tail: f64 = (0..n_closed).filter(|&j| j.abs_diff(center) > 10).map(|j| s.mean[j]).sum();
        let worst_norm = samples.iter().map(|v| v[n_closed]).fold(0.0, f64::max);
        let fit = match localization_length_fit(&profile, center, FitOptions::default()) {
            Ok(f) => json!({"xi": f.xi, "r_squared": f.r_squared, "exponential": f.exponential, "sites_used": f.sites_used}),
            Err(e) => json!({"error": e.to_string()}),
        };
        fits.insert(
            format!("{d}"),
            json!({"fit": fit, "population_beyond_10_sites": tail, "max_norm_deviation": worst_norm}),
        );
    }
    r.note("closed_profiles", Value::Object(fits));
    r.bundle.plots.push(PlotSpec::Lines {
        table: "fig3a_closed_profile".into(),
        x: "site".into(),
        y: "population".into(),
        group: Some("disorder_over_j".into()),
    });

    let gamma = r.cfg.gamma_over_j().ok_or_else(|| HarnessError::Config("fig3 needs a [bath] section".into()))?;
    let nbar = r.cfg.nbars().first().copied().unwrap_or(0.0);
    let open = r.add_table(Table::new("fig3_open_trace", &["disorder_over_j", "time_j", "site", "population", "stderr"]));
    let snaps = r.add_table(Table::new("fig3_open_snapshots", &["disorder_over_j", "time_j", "site", "population", "stderr"]));
    let mut integrity = None;
    for &n in &r.cfg.sizes() {
        let bath = BathSpec::uniform(n, gamma, nbar);
        for &d in &r.cfg.disorders() {
            let spec = r.spec(n, d);
            log::info!("{}: N = {n}, disorder/J = {d}", r.cfg.kind.name());
            let outcome = r.ensemble(|k| open_trace(r, &r.realization(&spec, k), &bath, &times).map_err(|e| open_failure(k, e)))?;
            let runs = r.finish("fig3_open", outcome, |(tr, _)| tr.populations.concat())?;
            for (_, rep) in &runs {
                if let Some(rep) = rep {
                    merge_integrity(&mut integrity, rep);
                }
            }
            let flat: Vec<Vec<f64>> = runs.iter().map(|(tr, _)| tr.populations.concat()).collect();
            let s = EnsembleStats::from_samples(&flat, r.cfg.master_seed);
            for (ti, &t) in times.iter().enumerate() {
                let is_snap = r.cfg.solver.snapshot_times.iter().any(|&x| (x - t).abs() < 1e-9);
                for j in 0..n {
                    let row = vec![d, t, (j + 1) as f64, s.mean[ti * n + j], s.stderr[ti * n + j]];
                    if is_snap {
                        r.table(snaps).push(row.clone());
                    }
                    r.table(open).push(row);
                }
            }
        }
    }
    r.note("gamma_over_j", json!(gamma));
    r.note("rate_convention", serde_json::to_value(r.cfg.bath.as_ref().map(|b| b.rate)).unwrap_or(Value::Null));
    r.note("nbar", json!(nbar));
    r.note("integrity", integrity_json(&integrity));
    r.bundle.plots.push(PlotSpec::Heatmap {
        table: "fig3_open_trace".into(),
        x: "time_j".into(),
        y: "site".into(),
        value: "population".into(),
        facet: Some("disorder_over_j".into()),
    });
    Ok(())
}

fn fig4(r: &mut Runner) -> Result<(), HarnessError> {
    let times = r.cfg.time.times();
    let gamma = r.cfg.gamma_over_j().ok_or_else(|| HarnessError::Config("fig4 needs a [bath] section".into()))?;
    let t = r.add_table(Table::new("fig4_dispersion", &["disorder_over_j", "nbar", "time_j", "delta_n", "stderr"]));
    let mut checks = Vec::new();
    let mut integrity = None;
    for &n in &r.cfg.sizes() {
        for &d in &r.cfg.disorders() {
            let spec = r.spec(n, d);
            log::info!("{}: N = {n}, disorder/J = {d}", r.cfg.kind.name());
            for &nbar in &r.cfg.nbars() {
                let bath = BathSpec::uniform(n, gamma, nbar);
                let outcome = r.ensemble(|k| {
                    let (tr, rep) =
                        open_trace(r, &r.realization(&spec, k), &bath, &times).map_err(|e| open_failure(k, e))?;
                    let dn = dispersion_series(&tr).map_err(|e| numerical(k, None, e))?;
                    Ok((dn, rep))
                })?;
                let runs = r.finish("fig4", outcome, |(dn, _)| dn.clone())?;
                for (_, rep) in &runs {
                    if let Some(rep) = rep {
                        merge_integrity(&mut integrity, rep);
                    }
                }
                let flat: Vec<Vec<f64>> = runs.iter().map(|(dn, _)| dn.clone()).collect();
                let s = EnsembleStats::from_samples(&flat, r.cfg.master_seed);
                for (ti, &time) in times.iter().enumerate() {
                    r.table(t).push(vec![d, nbar, time, s.mean[ti], s.stderr[ti]]);
                }
                for &ct in &r.cfg.solver.snapshot_times {
                    if let Some(ti) = times.iter().position(|&x| (x - ct).abs() < 1e-9) {
                        checks.push(json!({"n_sites": n, "disorder_over_j": d, "nbar": nbar, "time_j": ct,
                                           "delta_n": s.mean[ti], "final_delta_n": s.mean[times.len() - 1]}));
                    }
                }
            }
        }
    }
    r.note("gamma_over_j", json!(gamma));
    r.note("rate_convention", serde_json::to_value(r.cfg.bath.as_ref().map(|b| b.rate)).unwrap_or(Value::Null));
    r.note("checks", Value::Array(checks));
    r.note("integrity", integrity_json(&integrity));
    r.bundle.plots.push(PlotSpec::Lines {
        table: "fig4_dispersion".into(),
        x: "time_j".into(),
        y: "delta_n".into(),
        group: Some("nbar".into()),
    });
    Ok(())
}

fn map_samples(map: &ConcurrenceMap) -> Vec<f64> {
    map.values.iter().chain(&map.trace_deficits).flatten().copied().collect()
}

fn fig5_6(r: &mut Runner) -> Result<(), HarnessError> {
    let times = r.cfg.time.times();
    let disorders = r.cfg.disorders();
    let prefix = if disorders.iter().all(|&d| d == 0.0) {
        "fig5"
    } else if disorders.iter().all(|&d| d > 0.0) {
        "fig6"
    } else {
        "fig5_6"
    };
    let n = r.cfg.chain.n_sites;
    let center = r.cfg.initial.site(n);
    let gamma = r.cfg.gamma_over_j();
    let nbar = r.cfg.nbars().first().copied().unwrap_or(0.0);
    let columns = ["disorder_over_j", "time_j", "site", "concurrence", "trace_deficit"];
    let closed_t = r.add_table(Table::new(format!("{prefix}_concurrence_closed"), &columns));
    let open_t = gamma.map(|_| r.add_table(Table::new(format!("{prefix}_concurrence_open"), &columns)));
    let deaths_t = r.add_table(Table::new(format!("{prefix}_sudden_death"), &["disorder_over_j", "open", "site", "start_time_j", "end_time_j"]));
    let mut integrity = None;
    let mut worst_norm = 0.0f64;
    for &d in &disorders {
        let spec = r.spec(n, d);
        log::info!("concurrence: N = {n}, disorder/J = {d}");
        let outcome = r.ensemble(|k| {
            let prop = UnitaryPropagator::from_site_hamiltonian(&r.site_h(&r.realization(&spec, k)));
            let states = prop.evolve(&PureState::localized(n, center), &times).map_err(|e| numerical(k, None, e))?;
            let norm = states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
            let mut map = ConcurrenceMap::new(n, center);
            for (&t, s) in times.iter().zip(&states) {
                map.push(t, StateRef::Pure(s)).map_err(|e| numerical(k, Some(t), e))?;
            }
            Ok((map, norm))
        })?;
        let closed_runs = r.finish(&format!("{prefix}_closed"), outcome, |(m, _)| map_samples(m))?;
        worst_norm = closed_runs.iter().map(|(_, x)| *x).fold(worst_norm, f64::max);
        let closed_mean = mean_map(closed_runs.iter().map(|(m, _)| m), r.cfg.master_seed);
        push_map(r.table(closed_t), d, &closed_mean);
        push_deaths(r.table(deaths_t), d, 0.0, &closed_mean);

        if let (Some(gamma), Some(open_t)) = (gamma, open_t) {
            let bath = BathSpec::uniform(n, gamma, nbar);
            let outcome = r.ensemble(|k| {
                let mut map = ConcurrenceMap::new(n, center);
                let run = fock_run(r, &r.realization(&spec, k), &bath, &times, |_, t, rho| {
                    map.push(t, StateRef::Mixed(rho))
                        .map_err(|e| crate::open::OpenError::InvalidState(format!("t = {t}: {e}")))
                })
                .map_err(|e| open_failure(k, e))?;
                Ok((map, run.integrity))
            })?;
            let open_runs = r.finish(&format!("{prefix}_open"), outcome, |(m, _)| map_samples(m))?;
            for (_, rep) in &open_runs {
                merge_integrity(&mut integrity, rep);
            }
            let open_mean = mean_map(open_runs.iter().map(|(m, _)| m), r.cfg.master_seed);
            push_map(r.table(open_t), d, &open_mean);
            push_deaths(r.table(deaths_t), d, 1.0, &open_mean);
        }
    }
    r.note("gamma_over_j", json!(gamma));
    r.note("nbar", json!(nbar));
    r.note("closed_max_norm_deviation", json!(worst_norm));
    r.note("integrity", integrity_json(&integrity));
    for index in std::iter::once(closed_t).chain(open_t) {
        let table = r.bundle.tables[index].name.clone();
        r.bundle.plots.push(PlotSpec::Heatmap {
            table,
            x: "time_j".into(),
            y: "site".into(),
            value: "concurrence".into(),
            facet: Some("disorder_over_j".into()),
        });
    }
    Ok(())
}

/// Realization average of concurrence maps, cell by cell.
fn mean_map<'a>(maps: impl Iterator<Item = &'a ConcurrenceMap>, seed: u64) -> ConcurrenceMap {
    let maps: Vec<&ConcurrenceMap> = maps.collect();
    let first = maps[0];
    let flat: Vec<Vec<f64>> = maps.iter().map(|m| map_samples(m)).collect();
    let s = EnsembleStats::from_samples(&flat, seed);
    let (nt, ns) = (first.times.len(), first.sites.len());
    let (vals, defs) = s.mean.split_at(nt * ns);
    ConcurrenceMap {
        center: first.center,
        sites: first.sites.clone(),
        times: first.times.clone(),
        values: vals.chunks(ns).map(<[f64]>::to_vec).collect(),
        trace_deficits: defs.chunks(ns).map(<[f64]>::to_vec).collect(),
    }
}

fn push_map(t: &mut Table, d: f64, map: &ConcurrenceMap) {
    for (ti, &time) in map.times.iter().enumerate() {
        for (k, &site) in map.sites.iter().enumerate() {
            t.push(vec![d, time, (site + 1) as f64, map.values[ti][k], map.trace_deficits[ti][k]]);
        }
    }
}

fn push_deaths(t: &mut Table, d: f64, open: f64, map: &ConcurrenceMap) {
    for sd in map.sudden_deaths() {
        t.push(vec![d, open, (sd.site + 1) as f64, sd.start_time, sd.end_time]);
    }
}

fn fig7(r: &mut Runner) -> Result<(), HarnessError> {
    let times = r.cfg.time.times();
    let n = r.cfg.chain.n_sites;
    let center = r.cfg.initial.site(n);
    let d = r.cfg.disorders()[0];
    let spec = r.spec(n, d);
    let outcome = r.ensemble(|k| {
        let prop = UnitaryPropagator::from_site_hamiltonian(&r.site_h(&r.realization(&spec, k)));
        let states = prop.evolve(&PureState::localized(n, center), &times).map_err(|e| numerical(k, None, e))?;
        let mut sample = Vec::with_capacity(times.len() * (n + 1) + 1);
        let mut norm = 0.0f64;
        for s in &states {
            let p = s.populations();
            sample.push(site_moments(&p).1);
            norm = norm.max((s.norm() - 1.0).abs());
        }
        for s in &states {
            sample.extend(s.populations());
        }
        sample.push(norm);
        Ok(sample)
    })?;
    let samples = r.finish("fig7", outcome, |v| v.clone())?;
    let s = EnsembleStats::from_samples(&samples, r.cfg.master_seed);
    let nt = times.len();
    let spread = r.add_table(Table::new("fig7_spread", &["time_j", "sigma", "stderr"]));
    for (ti, &t) in times.iter().enumerate() {
        r.table(spread).push(vec![t, s.mean[ti], s.stderr[ti]]);
    }
    let density = r.add_table(Table::new("fig7_density", &["time_j", "site", "population"]));
    let snaps = r.add_table(Table::new("fig7_snapshots", &["time_j", "site", "population", "stderr"]));
    for (ti, &t) in times.iter().enumerate() {
        let is_snap = r.cfg.solver.snapshot_times.iter().any(|&x| (x - t).abs() < 1e-9);
        for j in 0..n {
            let idx = nt + ti * n + j;
            r.table(density).push(vec![t, (j + 1) as f64, s.mean[idx]]);
            if is_snap {
                r.table(snaps).push(vec![t, (j + 1) as f64, s.mean[idx], s.stderr[idx]]);
            }
        }
    }
    let fit = fit_spread(&times, &s.mean[..nt], n, center, r.cfg.chain.coupling, Some((0.5, f64::INFINITY)));
    let fit_json = match fit {
        Ok(f) => json!({"velocity": f.velocity, "expected_velocity": 2f64.sqrt() * r.cfg.chain.coupling.abs(),
                        "r_squared": f.r_squared, "window": [f.window.0, f.window.1], "points": f.points_used}),
        Err(e) => json!({"error": e.to_string()}),
    };
    r.note("spread_fit", fit_json);
    r.note("max_norm_deviation", json!(s.mean[s.mean.len() - 1]));
    r.bundle.plots.push(PlotSpec::Lines { table: "fig7_spread".into(), x: "time_j".into(), y: "sigma".into(), group: None });
    r.bundle.plots.push(PlotSpec::Heatmap {
        table: "fig7_density".into(),
        x: "time_j".into(),
        y: "site".into(),
        value: "population".into(),
        facet: None,
    });
    r.bundle.plots.push(PlotSpec::Lines {
        table: "fig7_snapshots".into(),
        x: "site".into(),
        y: "population".into(),
        group: Some("time_j".into()),
    });
    Ok(())
}

/// Population dynamics of an arbitrary chain: closed without a bath section,
/// open otherwise.
fn custom(r: &mut Runner) -> Result<(), HarnessError> {
    let times = r.cfg.time.times();
    let t = r.add_table(Table::new("custom_trace", &["n_sites", "disorder_over_j", "nbar", "time_j", "site", "population", "stderr"]));
    let disp = r.add_table(Table::new("custom_dispersion", &["n_sites", "disorder_over_j", "nbar", "time_j", "delta_n", "stderr"]));
    let gamma = r.cfg.gamma_over_j();
    let nbars = if gamma.is_some() { r.cfg.nbars() } else { vec![0.0] };
    let mut integrity = None;
    for &n in &r.cfg.sizes() {
        let site = r.cfg.initial.site(n);
        for &d in &r.cfg.disorders() {
            let spec = r.spec(n, d);
            log::info!("{}: N = {n}, disorder/J = {d}", r.cfg.kind.name());
            for &nbar in &nbars {
                let outcome = r.ensemble(|k| {
                    let real = r.realization(&spec, k);
                    let (tr, rep) = match gamma {
                        Some(g) => open_trace(r, &real, &BathSpec::uniform(n, g, nbar), &times)
                            .map_err(|e| open_failure(k, e))?,
                        None => {
                            let prop = UnitaryPropagator::from_site_hamiltonian(&r.site_h(&real));
                            let states =
                                prop.evolve(&PureState::localized(n, site), &times).map_err(|e| numerical(k, None, e))?;
                            let mut tr = ObservableTrace::default();
                            for (&time, s) in times.iter().zip(&states) {
                                tr.push(time, s.populations());
                            }
                            (tr, None)
                        }
                    };
                    let mut sample = tr.populations.concat();
                    sample.extend(dispersion_series(&tr).map_err(|e| numerical(k, None, e))?);
                    Ok((sample, rep))
                })?;
                let runs = r.finish("custom", outcome, |(v, _)| v.clone())?;
                for (_, rep) in &runs {
                    if let Some(rep) = rep {
                        merge_integrity(&mut integrity, rep);
                    }
                }
                let flat: Vec<Vec<f64>> = runs.into_iter().map(|(v, _)| v).collect();
                let s = EnsembleStats::from_samples(&flat, r.cfg.master_seed);
                let nt = times.len();
                for (ti, &time) in times.iter().enumerate() {
                    for j in 0..n {
                        r.table(t).push(vec![n as f64, d, nbar, time, (j + 1) as f64, s.mean[ti * n + j], s.stderr[ti * n + j]]);
                    }
                    r.table(disp).push(vec![n as f64, d, nbar, time, s.mean[nt * n + ti], s.stderr[nt * n + ti]]);
                }
            }
        }
    }
    r.note("integrity", integrity_json(&integrity));
    r.bundle.plots.push(PlotSpec::Lines {
        table: "custom_dispersion".into(),
        x: "time_j".into(),
        y: "delta_n".into(),
        group: Some("disorder_over_j".into()),
    });
    Ok(())
}
