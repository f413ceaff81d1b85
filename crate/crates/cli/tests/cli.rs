use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nemsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nemsim")).args(args).current_dir(cwd).output().expect("spawn nemsim")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL_OPEN: &str = r#"
kind = "custom"
realizations = 4
master_seed = 5
[chain]
n_sites = 4
[sweep]
disorder = [2.0]
nbar = [0.05]
[bath]
rate = { convention = "over_coupling", gamma_over_j = 0.1 }
[time]
stop = 2.0
step = 0.5
[solver]
population_method = "fock"
"#;

#[test]
fn table1_prints_aligned_rows_and_writes_headed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = nemsim(&["table1", "--out", "t1"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].contains("omega_over_2pi_GHz") && lines[0].contains("J_over_2pi_MHz"));
    let width = lines[0].len();
    assert!(lines[1..5].iter().all(|l| l.len() == width), "rows not aligned:\n{stdout}");
    let csv = fs::read_to_string(dir.path().join("t1/table1.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# nemsim artifact_version=1 config_hash="));
    assert!(first.ends_with("seed=2024"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nemsim(&["fig9"], dir.path())), 2);
    assert_eq!(code(&nemsim(&["table1", "--format", "xml"], dir.path())), 2);
    assert_eq!(code(&nemsim(&["table1", "--seed", "minus-one"], dir.path())), 2);
    assert_eq!(code(&nemsim(&[], dir.path())), 2);
    fs::write(dir.path().join("bad.toml"), "kind = \"custom\"\nrealizations = 0\n[chain]\nn_sites = 4\n").unwrap();
    assert_eq!(code(&nemsim(&["run", "bad.toml"], dir.path())), 2);
}

#[test]
fn missing_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nemsim(&["run", "absent.toml"], dir.path())), 4);
    assert_eq!(code(&nemsim(&["plot", "absent_bundle"], dir.path())), 4);
}

#[test]
fn numerical_failure_exits_3_and_leaves_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{SMALL_OPEN}integrator = {{ max_steps = 3 }}\n");
    fs::write(dir.path().join("fail.toml"), cfg).unwrap();
    let out = nemsim(&["run", "fail.toml", "--out", "fail"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("fail/failure.json")).unwrap()).unwrap();
    assert_eq!(report["exit_code"], 3);
    assert_eq!(report["realization"], 0);
}

#[test]
fn reruns_with_a_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("open.toml"), SMALL_OPEN).unwrap();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out = nemsim(&["run", "open.toml", "--seed", "99", "--workers", workers, "--out", name], dir.path());
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a/custom_trace.csv")).unwrap();
    let b = fs::read(dir.path().join("b/custom_trace.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).lines().next().unwrap().ends_with("seed=99"));

    let out = nemsim(&["run", "open.toml", "--seed", "100", "--out", "c"], dir.path());
    assert_eq!(code(&out), 0);
    assert_ne!(a, fs::read(dir.path().join("c/custom_trace.csv")).unwrap());
}

#[test]
fn json_format_and_plot_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("open.toml"), SMALL_OPEN).unwrap();
    let out = nemsim(&["run", "open.toml", "--format", "json", "--realizations", "2", "--out", "j"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("j/custom_trace.json")).unwrap()).unwrap();
    assert_eq!(doc["header"]["seed"], 5);
    let out = nemsim(&["plot", "j"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let pngs: Vec<&str> = stdout.lines().filter(|l| l.ends_with(".png")).collect();
    assert!(!pngs.is_empty());
    for p in pngs {
        assert!(fs::read(dir.path().join(p)).unwrap().starts_with(b"\x89PNG"));
    }
}
