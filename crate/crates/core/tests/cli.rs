use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_hadamard");

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn hadamard(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn predict_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios_dir().join("disk_cubic.json");
    let out = hadamard(dir.path(), &["predict", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("disk_cubic.report.json"));
    let slopes = report["prediction"]["simple_slopes"].as_array().unwrap();
    assert_eq!(slopes.len(), 2);
    assert!(slopes.iter().all(|s| s.as_f64().unwrap().is_finite()));
}

#[test]
fn schema_error_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"scenarios": [{"id": "x", "domain": {"kind": "unit_disk"}, "eigenspace": {"type": "disk", "k": 1, "m": 1}}]}"#,
    );
    let out = hadamard(dir.path(), &["predict", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["path"], "scenarios[0].family");
    assert_eq!(err["error"]["exit_code"], 2);
}

#[test]
fn unknown_family_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"scenarios": [{"id": "x", "domain": {"kind": "unit_disk"}, "family": {"name": "spiral"},
            "eigenspace": {"type": "disk", "k": 1, "m": 1}}]}"#,
    );
    assert_eq!(hadamard(dir.path(), &["predict", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(hadamard(dir.path(), &["predict", "/nonexistent.json"]).status.code(), Some(2));
}

#[test]
fn unattainable_tolerance_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tight.json",
        r#"{"scenarios": [{"id": "tight", "domain": {"kind": "unit_disk"},
            "family": {"name": "disk.holomorphic_poly", "terms": [{"power": 1, "coeff": 1.0}, {"power": 3, "coeff": 1.0}]},
            "eigenspace": {"type": "disk", "k": 1, "m": 1},
            "tolerances": {"abs": 0.0, "rel": 1e-12}}]}"#,
    );
    let out = hadamard(dir.path(), &["--quick", "validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_json(&dir.path().join("tight.report.json"));
    assert_eq!(report["validation"]["pass"], false);
    assert!(dir.path().join("tight.branches.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_runs_and_workers() {
    let cfg = scenarios_dir().join("translations.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    assert_eq!(hadamard(a.path(), &["--quick", "validate", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(hadamard(b.path(), &["--quick", "validate", cfg.to_str().unwrap()]).status.code(), Some(0));
    let out = hadamard(c.path(), &["--quick", "--workers", "3", "validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(&n)).unwrap(), "{n:?}");
        assert_eq!(x, std::fs::read(c.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn branch_table_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios_dir().join("square_bump.json");
    assert_eq!(hadamard(dir.path(), &["--quick", "validate", cfg.to_str().unwrap()]).status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("square_bump.branches.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "t,mesh_level,branch_id,lambda,extrapolated_lambda");
    assert!(text.lines().count() > 10);
}

#[test]
fn catalog_is_sorted_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = hadamard(dir.path(), &["catalog"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(String::from).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for n in [
        "translation",
        "dilation",
        "disk.holomorphic_poly",
        "square.edge_profiles",
        "dift.matrix_family_3x3",
        "dift.equal_slopes",
        "domain.unit_disk",
    ] {
        assert!(names.iter().any(|x| x == n), "missing {n}");
    }
}

#[test]
fn dift_examples_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = hadamard(dir.path(), &["dift", "dift.matrix_family_3x3"]);
    assert_eq!(ok.status.code(), Some(0));
    let report = read_json(&dir.path().join("dift.matrix_family_3x3.dift.json"));
    assert!(report["max_residual"].as_f64().unwrap() <= 1e-10);

    let bad = hadamard(dir.path(), &["dift", "dift.equal_slopes"]);
    assert_eq!(bad.status.code(), Some(1));
    let report = read_json(&dir.path().join("dift.equal_slopes.dift.json"));
    assert_eq!(report["conditions"]["failed"], "d");

    assert_eq!(hadamard(dir.path(), &["dift", "dift.nope"]).status.code(), Some(2));
}

#[test]
fn quick_mode_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios_dir().join("disk_cubic.json");
    let start = std::time::Instant::now();
    assert_eq!(hadamard(dir.path(), &["--quick", "validate", cfg.to_str().unwrap()]).status.code(), Some(0));
    assert!(start.elapsed().as_secs_f64() < 5.0);
}
