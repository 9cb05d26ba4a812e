//! End-to-end checks of the binary: exit-code contract, artifact layout,
//! and deterministic output.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qmoment"))
}

const BASE_CONFIG: &str = r#"
T = 1.0
j_max = 12
n_steps = 2048
p = 0
k = 0
J = "1..8"
mu = "x2"
seed = 7
"#;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn simulate_free_flight_endpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let traj = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("# config_hash: "));
    let last = traj.lines().last().unwrap();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    // Free flight from the ground state: c_1(T) = e^{-i pi^2 T}.
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    assert!((cols[1] - pi2.cos()).abs() < 1e-10);
    assert!((cols[2] + pi2.sin()).abs() < 1e-10);

    let cons: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("conservation.json")).unwrap())
            .unwrap();
    assert!(cons["max_norm_defect"].as_f64().unwrap() < 1e-9);
}

#[test]
fn missing_required_field_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "T = 1.0\nj_max = 12\nn_steps = 256\nJ = \"1..8\"\n");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("mu"),
        "diagnostic should name the missing field"
    );
}

#[test]
fn invalid_invariants_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    // p < k violates the regularity ordering.
    let cfg = write_config(
        tmp.path(),
        "T = 1.0\nj_max = 12\nn_steps = 256\np = 0\nk = 2\nJ = \"1..8\"\nmu = \"x2\"\n",
    );
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("p >= k"));
}

#[test]
fn dt_halving_writes_convergence_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &BASE_CONFIG.replace("n_steps = 2048", "n_steps = 512"),
    );
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "simulate",
        "--dt-halve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(out_dir.join("dt_convergence.csv")).unwrap();
    assert!(table.contains("n_steps,endpoint_diff_to_next"));
    assert_eq!(table.lines().count(), 5); // 2 header comments + 1 header + 2 rows
}

#[test]
fn solve_moment_zero_and_single_target() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);

    let zero = tmp.path().join("zero.csv");
    std::fs::write(&zero, "index,re,im\n").unwrap();
    let out_dir = tmp.path().join("out-zero");
    let out = run(&[
        "solve-moment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        zero.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("control.csv")).unwrap();
    for line in csv.lines().skip(3) {
        let u: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(u, 0.0);
    }

    let single = tmp.path().join("single.csv");
    std::fs::write(&single, "index,re,im\n1,0.2,-0.1\n").unwrap();
    let out_dir = tmp.path().join("out-single");
    let out = run(&[
        "solve-moment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        single.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("solver_report.json")).unwrap(),
    )
    .unwrap();
    let worst = report["residuals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-8, "residual {worst}");
}

#[test]
fn malformed_targets_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "index,re,im\n1,not-a-number,0\n").unwrap();
    let out = run(&["solve-moment", "--config", cfg.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn control_off_support_target_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    // Target mass on mode 10, outside J = 1..8.
    let mut psif = vec![[0.0f64, 0.0]; 12];
    psif[9] = [1e-3, 0.0];
    let ep = serde_json::json!({ "psi0": vec![[0.0f64, 0.0]; 12], "psif": psif });
    let path = tmp.path().join("endpoints.json");
    std::fs::write(&path, serde_json::to_string(&ep).unwrap()).unwrap();
    let out = run(&[
        "control",
        "--config",
        cfg.to_str().unwrap(),
        "linear",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("projection"));
}

#[test]
fn control_ground_state_to_ground_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let mut psi0 = vec![[0.0f64, 0.0]; 12];
    psi0[0] = [1.0, 0.0];
    let mut psif = vec![[0.0f64, 0.0]; 12];
    psif[0] = [pi2.cos(), -pi2.sin()]; // psi_1(T): free flight needs no control
    let ep = serde_json::json!({ "psi0": psi0, "psif": psif });
    let path = tmp.path().join("endpoints.json");
    std::fs::write(&path, serde_json::to_string(&ep).unwrap()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "control",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "nonlinear",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("control.csv")).unwrap();
    let max_abs = csv
        .lines()
        .skip(3)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap().abs())
        .fold(0.0f64, f64::max);
    assert!(max_abs < 1e-8, "ground-to-ground control should vanish, got {max_abs}");
}

#[test]
fn verify_default_scenario_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("verify.json")).unwrap())
            .unwrap();
    assert!(report.as_array().unwrap().iter().all(|o| o["pass"].as_bool().unwrap()));
}

#[test]
fn sweep_without_block_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("sweep"));
}

const SWEEP_BLOCK: &str = r#"
[sweep]
n_samples = 2
delta = 1e-3
epsilons = [1e-2, 1e-3]
cutoffs = [4, 8]
ladder_len = 32
"#;

#[test]
fn sweep_writes_tables_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{BASE_CONFIG}{SWEEP_BLOCK}"));
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for f in ["remainder_sweep.csv", "ratio_sweep.csv", "contraction_sweep.csv"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep_summary.json")).unwrap())
            .unwrap();
    let slope = summary["remainder_slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.2, "remainder slope {slope}");
    assert!(summary["errors"].as_array().unwrap().is_empty());
}

#[test]
fn sweep_with_failing_point_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    // An absurd drive amplitude trips the kick-phase guard at one point.
    let block = SWEEP_BLOCK.replace("epsilons = [1e-2, 1e-3]", "epsilons = [1e-2, 1e9]");
    let cfg = write_config(tmp.path(), &format!("{BASE_CONFIG}{block}"));
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("sweep_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["errors"].as_array().unwrap().len(), 1);
}

#[test]
fn identical_config_and_seed_reproduce_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE_CONFIG);
    let targets = tmp.path().join("t.csv");
    std::fs::write(&targets, "index,re,im\n0,0.5,0\n2,0.1,0.3\n").unwrap();
    let mut artifacts = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        let out = run(&[
            "solve-moment",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "11",
            targets.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        artifacts.push((
            std::fs::read(out_dir.join("control.csv")).unwrap(),
            std::fs::read(out_dir.join("solver_report.json")).unwrap(),
        ));
    }
    assert_eq!(artifacts[0], artifacts[1]);
}
