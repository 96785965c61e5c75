use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reactmix::io::{config_document, read_snapshot, write_snapshot};
use reactmix::mixture::{DensityField, MixtureParams, ReactionNetwork};
use reactmix::oracle::suite::registry;
use reactmix::solver::{FourierTerm, InitialProfile, SimConfig};
use serde_json::Value;

fn reactmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reactmix"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn shipped_example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/abc_reaction.json")
}

fn small_config(t_end: f64) -> SimConfig {
    let params = MixtureParams::new(vec![1.9, 2.0, 2.1], vec![10.0; 3]).with_epsilon(1e-3);
    let wave = |mean: f64, amplitude: f64, phase: f64| InitialProfile::Sinusoidal {
        mean,
        terms: vec![FourierTerm {
            amplitude,
            mode: 1,
            phase,
        }],
    };
    let init = vec![wave(1.0, 0.3, 0.0), wave(1.0, 0.3, 1.0), wave(0.2, 0.05, 2.0)];
    let mut c = SimConfig::new(32, params, ReactionNetwork::abc(1.0, 1.0), init, t_end);
    c.snapshot_every = 20;
    c.diagnostics.every = 10;
    c
}

fn write_config(dir: &Path, config: &SimConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, config_document(config)).unwrap();
    path
}

fn run_in(dir: &Path, config: &Path) -> (Output, PathBuf) {
    let out = dir.join("out");
    let o = reactmix(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (o, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn missing_config_exits_one_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let (o, out) = run_in(dir.path(), &missing);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 1);
    let entry: Value = serde_json::from_str(manifest.trim()).unwrap();
    assert_eq!(entry["exit_status"], 1);
}

#[test]
fn malformed_config_reports_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"schema_version\": 1,\n  \"grid_size\": 32,,\n}").unwrap();
    let (o, _) = run_in(dir.path(), &path);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let mut doc: Value = serde_json::from_str(&config_document(&small_config(0.1))).unwrap();
    doc["cfl_safety"] = Value::from(2.0);
    fs::write(&path, doc.to_string()).unwrap();
    let (o, _) = run_in(dir.path(), &path);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cfl_safety"), "{}", stderr(&o));

    doc["cfl_safety"] = Value::from(0.5);
    doc["params"]["molar_mass"] = Value::from("heavy");
    fs::write(&path, doc.to_string()).unwrap();
    let (o, _) = run_in(dir.path(), &path);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("params.molar_mass"), "{}", stderr(&o));
}

#[test]
fn zero_length_run_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(0.0));
    let (o, out) = run_in(dir.path(), &config);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with("step,t,dt,total_mass,"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 0);
}

#[test]
fn identical_configs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config(0.05));
    let (a, out) = run_in(dir.path(), &config);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let first = fs::read(out.join("diagnostics.csv")).unwrap();
    let snaps = fs::read(out.join("snapshots/snapshot_000001.bin")).unwrap();
    let (b, _) = run_in(dir.path(), &config);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(fs::read(out.join("diagnostics.csv")).unwrap(), first);
    assert_eq!(fs::read(out.join("snapshots/snapshot_000001.bin")).unwrap(), snaps);
    // the manifest is appended to, never rewritten
    let manifest = fs::read_to_string(out.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 2);
}

#[test]
fn solver_abort_exits_two_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(1.0);
    c.dt_max = 1e-16;
    let config = write_config(dir.path(), &c);
    let (o, out) = run_in(dir.path(), &config);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], false);
    assert_eq!(summary["all_pass"], false);
}

#[test]
fn shipped_example_passes_and_feeds_compact() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run_in(dir.path(), &shipped_example());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_pass"], true, "{summary:#}");
    assert_eq!(summary["t_final"], 1.0);

    let pattern = format!("{}/snapshots/*.bin", out.display());
    let o = reactmix(&["compact", "--snapshots", &pattern, "--h", "1e-2,1e-3", "--envelope"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,h,field,R_h,envelope,offset"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let r: f64 = cols[3].parse().unwrap();
        assert!(r.is_finite() && r >= 0.0, "{line}");
        rows += 1;
    }
    let snapshots = fs::read_dir(out.join("snapshots")).unwrap().count();
    assert_eq!(rows, snapshots * 2 * 4);
}

#[test]
fn compact_on_constant_snapshot_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let state = DensityField::uniform(&[1.0, 0.5], 64);
    write_snapshot(&dir.path().join("c.bin"), &state).unwrap();
    assert_eq!(read_snapshot(&dir.path().join("c.bin")).unwrap(), state);
    let pattern = format!("{}/*.bin", dir.path().display());
    let o = reactmix(&["compact", "--snapshots", &pattern, "--h", "0.01"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 4);
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(3), Some("0e0"), "{line}");
    }
}

#[test]
fn compact_rejects_empty_glob_and_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = format!("{}/*.bin", dir.path().display());
    assert_eq!(reactmix(&["compact", "--snapshots", &pattern]).status.code(), Some(1));
    fs::write(dir.path().join("junk.bin"), b"not a snapshot").unwrap();
    assert_eq!(reactmix(&["compact", "--snapshots", &pattern]).status.code(), Some(1));
}

#[test]
fn check_with_no_cases_prints_an_empty_table() {
    let o = reactmix(&["check", "--cases", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[cfg(not(feature = "mutation-b-sign"))]
#[test]
fn check_default_suite_passes() {
    let o = reactmix(&["check", "--seed", "0", "--cases", "100"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    for name in ["flux-cancellation", "entropy-flux-identity", "det-B", "det-DG", "G-round-trip", "R_h-cross-check", "kernel-scaling"] {
        assert!(stdout(&o).lines().any(|l| l.starts_with(name) && l.ends_with("pass")), "{name}");
    }
}

#[cfg(feature = "mutation-b-sign")]
#[test]
fn check_catches_corrupted_b_sign() {
    let o = reactmix(&["check", "--seed", "0", "--cases", "100"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("det-B"), "{}", stderr(&o));
}

#[cfg(not(feature = "mutation-b-sign"))]
#[test]
fn oracle_passes_with_one_row_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oracle.csv");
    let o = reactmix(&["oracle", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), registry().len() + 1);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn oracle_with_zero_tolerance_fails() {
    let o = reactmix(&["oracle", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), registry().len() + 1);
}
