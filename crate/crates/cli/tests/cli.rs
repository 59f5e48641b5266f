use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cutoff-fd"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("bellman.toml");
    let text = include_str!("../../core/configs/bellman.toml").replace("h = [0.1, 0.05, 0.025]", "h = [0.2, 0.1]");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let sol = dir.path().join("solution.csv");
    let rep = dir.path().join("report.json");
    run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--h",
        "0.1",
        "--K",
        "4",
        "--out",
        sol.to_str().unwrap(),
        "--report",
        rep.to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(&sol).unwrap();
    assert!(csv.starts_with("x1,x2,value,rho,is_interior,residual"));
    assert!(csv.lines().count() > 100);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(json["solve"]["final_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(json["row"]["K"].as_f64().unwrap(), 4.0);
}

#[test]
fn studies_write_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("h");
    run(&["converge-h", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.starts_with("h,K,iters,sup_v,boundary_ratio,wsd_max,res_norm,cutoff_defect,wall_ms"));
    assert_eq!(csv.lines().count(), 3);

    let out = dir.path().join("k");
    run(&["sweep-k", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(out.join("report.json").exists());
}

#[test]
fn verify_emits_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--h", "0.1", "--K", "2"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(json["weighted_second_diff_max"].as_f64().unwrap() > 0.0);

    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--barrier-only", "--h", "0.05"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["psi0"]["check"]["violations"], 0);
    assert_eq!(json["power"]["check"]["violations"], 0);
}

#[test]
fn demo_nonuniqueness() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["demo", "nonuniqueness", "--out", dir.path().to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("one_minus_abs_cubed"));
    assert!(dir.path().join("results.csv").exists());
}

#[test]
fn bad_input_fails() {
    assert!(!bin().args(["demo", "heat"]).output().unwrap().status.success());
    assert!(!bin().args(["solve", "--config", "/nonexistent.toml"]).output().unwrap().status.success());
}
