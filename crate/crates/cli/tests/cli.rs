use std::path::Path;
use std::process::{Command, Output};

use knpemi::output::{parse_probes, PROBE_HEADER};
use knpemi::scenario::{builtin_scenario, ScenarioConfig};

fn knpemi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knpemi"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

fn short_a_run(dir: &Path) -> Output {
    knpemi(&[
        "run",
        "--scenario",
        "A",
        "--end-ms",
        "0.3",
        "--snapshot-every",
        "0.1ms",
        "--out-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn seedless_flag_is_reserved() {
    let out = knpemi(&["run", "--scenario", "A", "--seedless"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn benchmark_scenario_points_to_converge() {
    let out = knpemi(&["run", "--scenario", "B"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("converge"));
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let out = knpemi(&["run", "--scenario", "Z9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_electroneutral_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = builtin_scenario("A").unwrap();
    cfg.species[2].initial_extra = 103.0;
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    let out = knpemi(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("electroneutrality"));
}

#[test]
fn malformed_intervals_and_sigma_are_rejected() {
    let out = knpemi(&["run", "--scenario", "A", "--snapshot-every", "soon"]);
    assert_eq!(out.status.code(), Some(2));
    let out = knpemi(&["compare", "--scenario", "C2", "--emi-sigma", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = knpemi(&["converge", "--levels", "8,24"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_probes_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_a_run(dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("probes.csv")).unwrap();
    assert!(csv.starts_with(PROBE_HEADER));
    let records = parse_probes(&csv).unwrap();
    assert!(!records.is_empty());
    let na = records
        .iter()
        .find(|r| r.time_ms == 0.0 && r.probe == "above_000" && r.field == "Na")
        .unwrap();
    assert!((na.value - 100.0).abs() < 1e-12);

    let snaps: Vec<_> = std::fs::read_dir(dir.path().join("snapshots")).unwrap().collect();
    assert_eq!(snaps.len(), 4);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["summary"]["steps"], 3);
    assert!(manifest["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    let echoed = ScenarioConfig::from_toml(manifest["config"].as_str().unwrap()).unwrap();
    let mut expected = builtin_scenario("A").unwrap();
    expected.time.end_ms = 0.3;
    assert_eq!(echoed, expected);
}

#[test]
fn identical_runs_give_identical_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(short_a_run(a.path()).status.success());
    assert!(short_a_run(b.path()).status.success());
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(a.path(), "probes.csv"), read(b.path(), "probes.csv"));
    assert_eq!(
        read(a.path(), "snapshots/step_000003.vtk"),
        read(b.path(), "snapshots/step_000003.vtk")
    );
}

#[test]
fn probe_extraction_matches_recorded_series() {
    let dir = tempfile::tempdir().unwrap();
    assert!(short_a_run(dir.path()).status.success());
    let recorded = parse_probes(&std::fs::read_to_string(dir.path().join("probes.csv")).unwrap()).unwrap();
    let snaps = dir.path().join("snapshots");
    let out = knpemi(&["probe", "--snapshots", snaps.to_str().unwrap(), "--at", "6,36", "--field", "phi"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let extracted = parse_probes(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(extracted.len(), 4);
    for e in &extracted {
        let r = recorded
            .iter()
            .find(|r| r.probe == "above_000" && r.field == "phi" && (r.time_ms - e.time_ms).abs() < 1e-9)
            .unwrap();
        assert!((r.value - e.value).abs() <= 1e-8 * r.value.abs().max(1e-3), "{} vs {}", r.value, e.value);
    }
}

#[test]
fn probe_requires_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = knpemi(&["probe", "--snapshots", dir.path().to_str().unwrap(), "--at", "1,1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");
}

#[test]
fn converge_writes_table_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = knpemi(&["converge", "--levels", "8,16", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("convergence.txt")).unwrap();
    assert!(table.contains("16"));
    let csv = std::fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert!(csv.starts_with("n,h,dt_s,time_s,quantity,error,rate"));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), table);
}

#[test]
fn compare_reports_potential_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = knpemi(&[
        "compare",
        "--scenario",
        "A",
        "--end-ms",
        "0.2",
        "--emi-sigma",
        "from-initial",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("compare.txt")).unwrap();
    assert!(report.contains("max |Δφ_e|"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let sigma_e = manifest["summary"]["sigma_extra_uS_per_um"].as_f64().unwrap();
    assert!((sigma_e - 1.31).abs() < 0.02);
    for f in ["probes_knp.csv", "probes_emi.csv", "final_knp.vtk", "final_emi.vtk"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
