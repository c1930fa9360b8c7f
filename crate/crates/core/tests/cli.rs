use std::path::Path;
use std::process::{Command, Output};

use spectral_heat::basis::OrthonormalBasis;
use spectral_heat::config::RunConfig;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectral-heat"))
        .args(args)
        .env("SPECTRAL_HEAT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn config_show_round_trips() {
    let o = run(&[
        "--domain", "ball", "--n", "3", "--gamma", "0.25", "--seed", "9", "config", "show",
    ]);
    assert!(o.status.success());
    let cfg = RunConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(cfg.domain.gamma(), Some(0.25));
    assert_eq!(cfg.domain.dim(), 3);
    assert_eq!(cfg.seed, Some(9));
}

#[test]
fn geom_dist_prints_csv() {
    let o = run(&["geom", "dist", "--x", "-0.5", "--y", "0.5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("quantity,x,y,r,value,stderr"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "distance");
    let d: f64 = fields[4].parse().unwrap();
    assert!((d - std::f64::consts::FRAC_PI_3).abs() < 1e-14);
    assert!(!text.contains('\r'));
}

#[test]
fn kernel_eval_prints_json() {
    let o = run(&[
        "--degree", "60", "kernel", "eval", "--t", "0.5", "--x", "0.1", "--y", "-0.3",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["tail_bound"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn bad_parameters_exit_with_error() {
    let o = run(&["--domain", "ball", "--gamma", "-1", "geom", "lift", "--x", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("γ > −1/2"));
    let o = run(&["--domain", "simplex", "geom", "lift", "--x", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_writes_reports_and_signals_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--degree", "30", "--output-dir", out, "validate", "ops"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("[PASS] ops"));
    assert!(dir.path().join("ops.json").exists());
    assert!(dir.path().join("ops.csv").exists());

    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, "[basis]\nmax_degree = 30\neigen_tolerance = 1e-300\n").unwrap();
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        out,
        "validate",
        "ops",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL] ops"));
}

#[test]
fn basis_build_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("basis.json");
    let o = run(&[
        "--domain",
        "simplex",
        "--kappa",
        "0.5,0.5,0.5",
        "--degree",
        "6",
        "basis",
        "build",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let b = OrthonormalBasis::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(b.max_degree(), 6);
    assert_eq!(b.num_members(), 28);
}

#[test]
fn kernel_export_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let o = run(&[
        "--degree",
        "40",
        "kernel",
        "export",
        "--times",
        "0.5,1",
        "--resolution",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,i,j,x1,y1,weight_y,kernel,tail_bound"));
    assert_eq!(lines.count(), 2 * 4 * 4);
}

#[test]
fn multiplier_rejects_unresolved_bump() {
    let o = run(&[
        "--degree",
        "20",
        "kernel",
        "multiplier",
        "--family",
        "smooth-bump",
        "--delta",
        "0.05",
        "--x",
        "0.1",
        "--y",
        "0.2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("capacity"));
}
