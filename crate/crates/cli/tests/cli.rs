use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lionphi_core::runner::{trace_from_csv, trace_to_csv};

fn lionphi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lionphi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const TOY: &str = r#"{"objective": {"kind": "quadratic", "center": [1.5, 0.0]},
 "phi": {"kind": "L1"},
 "discrete": {"lr": 0.01, "lambda": 1.5, "beta1": 0.9, "beta2": 0.99},
 "x0": [-2.0, 2.0], "steps": 5000}"#;

#[test]
fn trace_writes_round_trippable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.json", TOY);
    let out = dir.path().join("trace.csv");
    let o = lionphi(&["trace", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = trace_from_csv(&text).unwrap();
    assert_eq!(rows.len(), 5001);
    assert_eq!(trace_to_csv(&rows), text);
    let last = rows.last().unwrap();
    assert!((last.linf_x - 2.0 / 3.0).abs() <= 1e-3);
    assert!((last.f - (1.5f64 - 2.0 / 3.0).powi(2)).abs() <= 5e-3);
}

#[test]
fn trace_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noisy.json",
        r#"{"objective": {"kind": "logistic", "synthetic": {"n": 200, "dim": 4, "seed": 1}, "reg": 0.01},
            "phi": {"kind": "L1"}, "discrete": {"lr": 0.01, "lambda": 1.0, "beta1": 0.9, "beta2": 0.99},
            "noise": {"kind": "minibatch_subset"}, "n_batch": 8, "x0": [0, 0, 0, 0], "steps": 300, "seed": 3}"#,
    );
    let a = lionphi(&["--threads", "1", "trace", "--config", cfg.to_str().unwrap()]);
    let b = lionphi(&["--threads", "3", "trace", "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let c = lionphi(&["trace", "--config", cfg.to_str().unwrap(), "--seed", "4"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"objective": {"kind": "quadratic", "center": [0]}}"#);
    assert_eq!(lionphi(&["trace", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lionphi(&["trace", "--config", "/definitely/missing.json"]).status.code(), Some(2));
    assert_eq!(lionphi(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(lionphi(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn numeric_blow_up_exits_3_with_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "blow.json",
        r#"{"objective": {"kind": "quadratic", "center": [0.0], "diag": [1e300]}, "phi": {"kind": "HalfSquaredL2"},
            "discrete": {"lr": 1.0, "lambda": 0.0, "beta1": 0.5, "beta2": 0.9}, "x0": [1e10], "steps": 50}"#,
    );
    let o = lionphi(&["trace", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));
}

#[test]
fn sweep_brackets_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "toy.json", TOY);
    let o = lionphi(&["sweep-lambda", "--config", cfg.to_str().unwrap(), "--lambdas", "0.3,0.6,0.7,1.0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,loss,feasible,linf_x,lambda0");
    assert_eq!(lines.len(), 5);
    let l0: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((l0 - 0.65).abs() < 1e-12);
    let single = lionphi(&["sweep-lambda", "--config", cfg.to_str().unwrap(), "--lambdas", "0.3"]);
    assert_eq!(single.status.code(), Some(2));
}

#[test]
fn distributed_writes_footer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "dist.json",
        r#"{"objective": {"kind": "quadratic", "center": [1.5, 0.0]}, "phi": {"kind": "L1"},
            "discrete": {"lr": 0.01, "lambda": 0.5, "beta1": 0.9, "beta2": 0.99},
            "noise": {"kind": "gaussian_iid", "sigma": 0.5}, "x0": [-2.0, 2.0], "steps": 100,
            "distributed": {"workers": 4, "rule": "average_signs"}}"#,
    );
    let o = lionphi(&["distributed", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("round,loss,dist_dom,bits_cum,delta1_w0,delta1_w1,delta1_w2,delta1_w3,delta2_w0"));
    // 4 workers × 2 bits × 2 coordinates up, ceil(log2 9) = 4 bits × 2 down
    assert!(text.ends_with("# bits_upstream_per_round=16,bits_downstream_per_round=8,rounds=100\n"));
    assert_eq!(text.lines().count(), 1 + 101 + 1);
}

#[test]
fn verify_reports_and_exit_codes() {
    let ok = lionphi(&["verify", "--suite", "distributed", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["suite"], "distributed");

    let mutant = lionphi(&["verify", "--suite", "convex", "--samples", "500", "--subgradient", "sign-zero-up"]);
    assert_eq!(mutant.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&mutant.stdout).unwrap();
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, vec!["stationary_fixed_point"]);
}

#[test]
fn verify_is_byte_identical() {
    let args = ["verify", "--suite", "stochastic", "--samples", "10000", "--seed", "7"];
    let a = lionphi(&args);
    let mut threaded = vec!["--threads", "2"];
    threaded.extend(args);
    let b = lionphi(&threaded);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn conj_check_small_grid() {
    let o = lionphi(&["conj-check", "--points", "20", "--step", "0.05", "--projections", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["kinds"].as_array().unwrap().len(), 11);
}
