use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn polyhom(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyhom")).current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn version_matches_embedded_code_version() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyhom(dir.path(), &["--version"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), polyhom::CODE_VERSION);
}

#[test]
fn phantom_check_passes_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("quad20.json");
    let o = polyhom(dir.path(), &["phantom-check", "--config", cfg.to_str().unwrap(), "--output", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("identity holds to 1e-10"));
    // nothing is written outside the output directory
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from("out")]);
    for f in ["results.csv", "summary.json", "checkpoint.jsonl"] {
        assert!(dir.path().join("out").join(f).exists());
    }
}

#[test]
fn failed_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture("quad20.json")).unwrap()).unwrap();
    cfg["thresholds"] = serde_json::json!({ "identity_relative": -1.0 });
    std::fs::write(dir.path().join("strict.json"), cfg.to_string()).unwrap();
    let o = polyhom(dir.path(), &["phantom-check", "--config", "strict.json", "-o", "out"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("verdict fail"));
}

#[test]
fn missing_graph_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyhom(dir.path(), &["graph", "validate", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not found"));
}

#[test]
fn unknown_flag_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyhom(dir.path(), &["graph", "generate", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bogus"));
}

#[test]
fn invalid_config_points_at_schema() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"kind":"phantom","pair":{"kind":"quadratic","matrix":[1]},"colour":1}"#).unwrap();
    let o = polyhom(dir.path(), &["study", "run", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour") && stderr(&o).contains("README"));
}

#[test]
fn generated_graph_validates() {
    let dir = tempfile::tempdir().unwrap();
    let o = polyhom(dir.path(), &["graph", "generate", "--seed", "4", "-o", "g"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = polyhom(dir.path(), &["graph", "validate", "g/graph.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict pass"));
}

#[test]
fn study_rerun_resumes_with_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("quad20.json");
    let args = ["study", "run", "--config", cfg.to_str().unwrap(), "-o", "run", "-v"];
    let first = polyhom(dir.path(), &args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let csv = std::fs::read_to_string(dir.path().join("run/results.csv")).unwrap();
    let second = polyhom(dir.path(), &args);
    assert_eq!(second.status.code(), Some(0));
    assert!(stderr(&second).contains("24 points, 24 resumed"), "{}", stderr(&second));
    assert_eq!(std::fs::read_to_string(dir.path().join("run/results.csv")).unwrap(), csv);
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn stdout_rows_match_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("quad20.json");
    let o = polyhom(dir.path(), &["study", "run", "--config", cfg.to_str().unwrap(), "-o", "out"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let printed = stdout(&o);
    let table: Vec<Vec<&str>> = printed.lines().take(25).map(|l| l.split_whitespace().collect()).collect();
    for (line, row) in text.lines().zip(&table) {
        let cells: Vec<&str> = line.split(',').filter(|c| !c.is_empty()).collect();
        assert_eq!(&cells, row);
    }
}

#[test]
fn gradient_check_passes_on_kuhn_grun_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("kg16.json");
    let o = polyhom(dir.path(), &["energy", "grad-check", "--config", cfg.to_str().unwrap(), "--samples", "3", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/grad_check.json").exists());
}

#[test]
fn exact_free_energy_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("quad20.json");
    let o = polyhom(dir.path(), &["free-energy", "exact", "-c", cfg.to_str().unwrap(), "--beta", "10,100", "-o", "out"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/free_energy.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(stdout(&o).contains(&v[0]["value"].to_string()));
}
