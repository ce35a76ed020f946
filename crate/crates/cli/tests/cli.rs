use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeshift"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("EDGESHIFT_THREADS", "1")
        .output()
        .unwrap()
}

#[test]
fn constant_shift_expansion_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("constant_shift.json");
    let out = run(&["expand", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("expansion.json")).unwrap()).unwrap();
    assert!((record["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(record["s_star"].as_f64(), Some(-1.0));
    assert_eq!(record["psi1_norm_sq"].as_f64(), Some(0.0));
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"operator\": {\"m\": 1,,}\n}\n").unwrap();
    let out = run(&["bands", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bands", "--config", "/nonexistent/config.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn higher_order_cell_problem_exits_3_and_marks_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("bilaplacian.json");
    let out = run(&["lower", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("lower.FAILED").exists());
}
