//! End-to-end CLI tests: artifact schemas, byte-level determinism across runs
//! and thread counts, and machine-readable error lines.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modelrobust"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("modelrobust_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_exact_linear_csv(path: &Path) {
    std::fs::write(path, "intercept,x,y\n1,1,3\n1,2,5\n1,3,7\n").unwrap();
}

fn write_zero_noise_linear_csv(path: &Path, n: usize) {
    let mut text = String::from("intercept,x,y\n");
    for i in 0..n {
        let x = i as f64 / (n - 1) as f64;
        text.push_str(&format!("1,{x},{}\n", 1.0 + 2.0 * x));
    }
    std::fs::write(path, text).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn fit_recovers_exact_linear_coefficients() {
    let dir = temp_dir("fit");
    let csv = dir.join("lin.csv");
    write_exact_linear_csv(&csv);
    let status = bin()
        .args(["fit", "--data"])
        .arg(&csv)
        .args(["--response", "y", "--functional", "ols", "--out"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let content = read(&dir.join("estimate.csv"));
    let mut lines = content.lines();
    assert_eq!(lines.next().unwrap(), "component,estimate,se_sandwich");
    let row1: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row2: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row1[0], "intercept");
    assert!((row1[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(row2[0], "x");
    assert!((row2[1].parse::<f64>().unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn diagnose_zero_noise_trace_is_constant_and_svg_follows_csv() {
    let dir = temp_dir("diag");
    let csv = dir.join("lin.csv");
    write_zero_noise_linear_csv(&csv, 120);
    let status = bin()
        .args(["diagnose", "--data"])
        .arg(&csv)
        .args([
            "--response",
            "y",
            "--functional",
            "ols",
            "--regressor",
            "x",
            "--b",
            "60",
            "--seed",
            "1",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let trace = read(&dir.join("trace.csv"));
    let mut slope_estimates = Vec::new();
    let mut centers = 0;
    for line in trace.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] != "unweighted" && fields[1] == "x" {
            centers += 1;
            slope_estimates.push(fields[2].parse::<f64>().unwrap());
        }
    }
    assert_eq!(centers, 9, "nine interior deciles expected");
    for v in &slope_estimates {
        assert!((v - 2.0).abs() < 1e-10, "weighted slope {v} drifted");
    }
    let svg = read(&dir.join("trace.svg"));
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = temp_dir("determinism");
    let run = |out: &Path| {
        let status = bin()
            .args([
                "bootstrap",
                "--pop",
                "quadratic",
                "--n",
                "80",
                "--functional",
                "huber",
                "--param",
                "k=1.345",
                "--m",
                "80",
                "--b",
                "300",
                "--seed",
                "9",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    run(&a);
    run(&b);
    assert_eq!(read(&a.join("estimate.csv")), read(&b.join("estimate.csv")));
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = temp_dir("threads");
    let run = |out: &Path, threads: &str| {
        let status = bin()
            .args([
                "clt-check",
                "--pop",
                "quadratic",
                "--functional",
                "ols",
                "--n",
                "100",
                "--r",
                "80",
                "--seed",
                "4",
                "--threads",
                threads,
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (dir.join("t1"), dir.join("t2"));
    run(&a, "1");
    run(&b, "2");
    assert_eq!(read(&a.join("clt_report.csv")), read(&b.join("clt_report.csv")));

    // MODELROBUST_THREADS is the fallback for --threads
    let c = dir.join("env");
    let status = bin()
        .env("MODELROBUST_THREADS", "1")
        .args([
            "clt-check",
            "--pop",
            "quadratic",
            "--functional",
            "ols",
            "--n",
            "100",
            "--r",
            "80",
            "--seed",
            "4",
            "--out",
        ])
        .arg(&c)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(&a.join("clt_report.csv")), read(&c.join("clt_report.csv")));
}

#[test]
fn errors_are_machine_readable_lines() {
    let dir = temp_dir("error");
    let csv = dir.join("lin.csv");
    write_exact_linear_csv(&csv);
    let output = bin()
        .args(["fit", "--data"])
        .arg(&csv)
        .args(["--response", "nope", "--functional", "ols", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let line = stderr.lines().last().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(parsed["error"], "invalid_input");
    assert!(parsed["message"].as_str().unwrap().contains("nope"));

    // collinear data reports its own code
    std::fs::write(dir.join("bad.csv"), "a,b,y\n1,2,1\n2,4,2\n3,6,3\n").unwrap();
    let output = bin()
        .args(["fit", "--data"])
        .arg(dir.join("bad.csv"))
        .args(["--response", "y", "--functional", "ols", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    let parsed: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(parsed["error"], "collinear_regressors");
}

#[test]
fn plugin_limit_gap_shrinks_on_builtin_sample() {
    let dir = temp_dir("plugin");
    let status = bin()
        .args([
            "plugin-limit",
            "--pop",
            "quadratic",
            "--n",
            "200",
            "--functional",
            "ols",
            "--m-grid",
            "50,200,1000",
            "--b",
            "4000",
            "--seed",
            "1",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let content = read(&dir.join("plugin_limit.csv"));
    let mut lines = content.lines();
    assert_eq!(lines.next().unwrap(), "m,bv_frobenius,av_frobenius,rel_gap,failures");
    let rows: Vec<Vec<String>> =
        lines.map(|l| l.split(',').map(|s| s.to_string()).collect()).collect();
    assert_eq!(rows.len(), 3);
    let last_gap: f64 = rows[2][3].parse().unwrap();
    assert!(last_gap < 0.10, "gap at M=1000 was {last_gap}");
}

#[test]
fn simulate_writes_reproducible_samples_and_config_file_supplies_defaults() {
    let dir = temp_dir("simulate");
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# experiment defaults\npop=deterministic-quadratic\nn=40\n").unwrap();
    let run = |out: &Path| {
        let status = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", "11", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let (a, b) = (dir.join("a"), dir.join("b"));
    run(&a);
    run(&b);
    let sample = read(&a.join("sample.csv"));
    assert_eq!(sample, read(&b.join("sample.csv")));
    assert!(sample.starts_with("intercept,x,y\n"));
    // zero-noise: y = x² on every row
    for line in sample.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[2], f[1] * f[1]);
    }
}

#[test]
fn misspec_test_rejects_on_quadratic_sample() {
    let dir = temp_dir("misspec");
    let status = bin()
        .args([
            "misspec-test",
            "--pop",
            "quadratic",
            "--n",
            "2000",
            "--functional",
            "ols",
            "--regressor",
            "x",
            "--b",
            "200",
            "--seed",
            "3",
            "--out",
        ])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let content = read(&dir.join("misspec.csv"));
    let row: Vec<&str> = content.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "x");
    let z: f64 = row[3].parse().unwrap();
    assert!(z.abs() > 3.0, "expected rejection, z = {z}");
}
