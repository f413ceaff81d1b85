use std::fs;

use nemsim::harness::{
    emit_plots, execute, fig6_preset, preset, run_and_persist, run_experiment, ArtifactBundle, ExperimentConfig,
    ExperimentKind, HarnessError, OutputFormat, PopulationMethod, Provenance, Table, FAILURE_FILE,
};
use nemsim::open::{IntegratorOptions, Method};

fn small_open(method: PopulationMethod) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        r#"
kind = "custom"
realizations = 6
master_seed = 77
[chain]
n_sites = 4
[sweep]
disorder = [3.0]
nbar = [0.05]
[bath]
rate = { convention = "over_coupling", gamma_over_j = 0.1 }
[time]
stop = 2.0
step = 0.5
[solver]
population_method = "fock"
integrator = { method = { kind = "rk4", step = 0.01 } }
"#,
    )
    .map(|mut c| {
        c.solver.population_method = method;
        c
    })
    .unwrap()
}

fn csv_bytes(bundle: &ArtifactBundle) -> Vec<Vec<u8>> {
    let prov = bundle.provenance();
    bundle
        .tables
        .iter()
        .map(|t| {
            let mut buf = Vec::new();
            t.write_csv(&mut buf, &prov).unwrap();
            buf
        })
        .collect()
}

#[test]
fn worker_count_does_not_change_results() {
    for method in [PopulationMethod::Fock, PopulationMethod::Moments] {
        let mut outputs = Vec::new();
        for workers in [1, 2, 4] {
            let mut cfg = small_open(method);
            cfg.workers = workers;
            outputs.push(csv_bytes(&run_experiment(&cfg).unwrap()));
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }
    // adaptive stepping is per realization, so it is schedule independent too
    let mut a = small_open(PopulationMethod::Fock);
    a.solver.integrator = IntegratorOptions::default();
    let mut b = a.clone();
    b.workers = 3;
    assert_eq!(csv_bytes(&run_experiment(&a).unwrap()), csv_bytes(&run_experiment(&b).unwrap()));
}

#[test]
fn rerun_writes_identical_files() {
    let cfg = small_open(PopulationMethod::Fock);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let bundle = run_and_persist(&cfg, d1.path()).unwrap();
    run_and_persist(&cfg, d2.path()).unwrap();
    for t in &bundle.tables {
        let name = t.file_name(OutputFormat::Csv);
        let a = fs::read(d1.path().join(&name)).unwrap();
        assert_eq!(a, fs::read(d2.path().join(&name)).unwrap());
        let first = String::from_utf8_lossy(&a).lines().next().unwrap().to_string();
        let prov = Provenance::parse_comment(&first).unwrap();
        assert_eq!(prov.config_hash, cfg.hash());
        assert_eq!(prov.seed, 77);
    }
    let reloaded = ArtifactBundle::load(d1.path()).unwrap();
    assert_eq!(reloaded.tables, bundle.tables);
    assert_eq!(reloaded.config, cfg);
}

#[test]
fn json_bundles_round_trip() {
    let mut cfg = preset(ExperimentKind::Fig7Ctqw, false);
    cfg.format = OutputFormat::Json;
    cfg.time.stop = 2.0;
    let dir = tempfile::tempdir().unwrap();
    let bundle = run_and_persist(&cfg, dir.path()).unwrap();
    assert!(dir.path().join("fig7_spread.json").exists());
    assert_eq!(ArtifactBundle::load(dir.path()).unwrap().tables, bundle.tables);
}

#[test]
fn single_realization_has_zero_stderr() {
    let mut cfg = small_open(PopulationMethod::Moments);
    cfg.realizations = 1;
    let bundle = run_experiment(&cfg).unwrap();
    let t = bundle.table("custom_trace").unwrap();
    assert!(t.column("stderr").unwrap().iter().all(|&e| e == 0.0));
}

#[test]
fn standard_error_shrinks_with_realizations() {
    let mut cfg = preset(ExperimentKind::Fig2Dispersion, false);
    cfg.sweep.n_sites = vec![100];
    cfg.sweep.disorder = vec![5.0];
    let stderr = |r: usize| {
        let mut c = cfg.clone();
        c.realizations = r;
        run_experiment(&c).unwrap().table("fig2_dispersion").unwrap().column("stderr").unwrap()[0]
    };
    let ratio = stderr(125) / stderr(500);
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn failing_realization_is_reported_and_partial_output_kept() {
    let mut cfg = small_open(PopulationMethod::Fock);
    cfg.solver.integrator = IntegratorOptions { method: Method::DormandPrince { rtol: 1e-8, atol: 1e-12 }, max_steps: 3, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let err = run_and_persist(&cfg, dir.path()).unwrap_err();
    match &err {
        HarnessError::Numerical { realization, time, .. } => {
            assert_eq!(*realization, Some(0));
            assert!(time.is_some());
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.exit_code(), 3);
    let failure: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(FAILURE_FILE)).unwrap()).unwrap();
    assert_eq!(failure["realization"], 0);
    assert!(dir.path().join("replay.toml").exists());
}

#[test]
fn partial_results_survive_a_late_failure() {
    // the clean chain fits the step budget, the wildly disordered one does not
    let mut cfg = small_open(PopulationMethod::Fock);
    cfg.realizations = 3;
    cfg.solver.integrator = IntegratorOptions { method: Method::DormandPrince { rtol: 1e-8, atol: 1e-12 }, max_steps: 200, ..Default::default() };
    cfg.sweep.disorder = vec![0.0];
    if let Err(f) = execute(&cfg) {
        panic!("clean chain failed: {}", f.error);
    }
    cfg.sweep.disorder = vec![0.0, 5000.0];
    let failure = execute(&cfg).unwrap_err();
    assert_eq!(failure.error.exit_code(), 3);
    let trace = failure.partial.table("custom_trace").unwrap();
    let d = trace.column("disorder_over_j").unwrap();
    assert!(!d.is_empty() && d.iter().all(|&x| x == 0.0));
    let dir = tempfile::tempdir().unwrap();
    assert!(run_and_persist(&cfg, dir.path()).is_err());
    assert!(dir.path().join("custom_trace.csv").exists());
    assert!(dir.path().join(FAILURE_FILE).exists());
}

#[test]
fn invalid_configs_are_usage_errors() {
    let mut cfg = preset(ExperimentKind::Fig7Ctqw, false);
    cfg.realizations = 0;
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
    assert!(ExperimentConfig::from_toml_str("kind = \"fig9\"").is_err());
    assert!("fig9".parse::<ExperimentKind>().is_err());
    let e = ExperimentConfig::load(std::path::Path::new("/nonexistent/cfg.toml")).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}

#[test]
fn presets_survive_a_toml_round_trip() {
    for kind in [
        ExperimentKind::Table1,
        ExperimentKind::Fig2Dispersion,
        ExperimentKind::Fig3Profiles,
        ExperimentKind::Fig4Thermal,
        ExperimentKind::Fig5_6Concurrence,
        ExperimentKind::Fig7Ctqw,
        ExperimentKind::Custom,
    ] {
        for full in [false, true] {
            let cfg = preset(kind, full);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
        }
    }
    let f3 = preset(ExperimentKind::Fig3Profiles, false);
    assert!((f3.gamma_over_j().unwrap() - 0.05).abs() < 1e-12);
    assert_eq!(preset(ExperimentKind::Fig4Thermal, true).chain.n_sites, 51);
    assert_eq!(fig6_preset(false).sweep.disorder, vec![10.0]);
    assert_eq!(preset(ExperimentKind::Fig2Dispersion, false).realizations, 500);
}

#[test]
fn plots_are_rendered_deterministically() {
    let mut cfg = fig6_preset(false);
    cfg.chain.n_sites = 7;
    cfg.time.stop = 3.0;
    let dir = tempfile::tempdir().unwrap();
    run_and_persist(&cfg, dir.path()).unwrap();
    let first = emit_plots(dir.path()).unwrap();
    assert!(first.iter().any(|p| p.file_name().unwrap().to_string_lossy().starts_with("fig6_concurrence_open")));
    let bytes: Vec<Vec<u8>> = first.iter().map(|p| fs::read(p).unwrap()).collect();
    let second = emit_plots(dir.path()).unwrap();
    assert_eq!(first, second);
    assert_eq!(bytes, second.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
}

#[test]
fn plotting_refuses_missing_or_empty_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(emit_plots(dir.path()).unwrap_err().exit_code(), 4);
    let mut cfg = preset(ExperimentKind::Fig7Ctqw, false);
    cfg.time.stop = 1.0;
    let mut bundle = run_experiment(&cfg).unwrap();
    for t in &mut bundle.tables {
        *t = Table::new(t.name.clone(), &t.columns.iter().map(String::as_str).collect::<Vec<_>>());
    }
    bundle.write(dir.path()).unwrap();
    let err = emit_plots(dir.path()).unwrap_err();
    assert!(err.to_string().contains("no finite") || err.to_string().contains("empty"), "{err}");
}
