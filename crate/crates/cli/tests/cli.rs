use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mewls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mewls"))
        .args(args)
        .env_remove("MEWLS_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mewls(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

/// Data rows of a CSV, header dropped.
fn rows(dir: &Path, name: &str) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join(name))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn generate_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    for (dir, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        ok(&["generate", "franke", "--seed", seed, "--n-clean", "200", "--n-outliers", "20", "--out", &path(tmp.path(), dir)]);
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("franke.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(
        fs::read(tmp.path().join("a/manifest.json")).unwrap(),
        fs::read(tmp.path().join("b/manifest.json")).unwrap()
    );
    let flags = rows(&tmp.path().join("a"), "franke_flags.csv");
    assert_eq!(flags.len(), 220);
    assert_eq!(flags.iter().filter(|r| r[1] == "1").count(), 20);
}

#[test]
fn unperturbed_sphere_has_no_flags() {
    let tmp = TempDir::new().unwrap();
    ok(&["generate", "sphere", "--perturb", "0", "--out", &path(tmp.path(), "s")]);
    let flags = rows(&tmp.path().join("s"), "sphere_flags.csv");
    assert!(!flags.is_empty());
    assert!(flags.iter().all(|r| r[1] == "0"));
}

#[test]
fn fit_at_unit_reduction_is_least_squares() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    ok(&["fit", "--r", "1", "--out", out.to_str().unwrap()]);
    let report = json(&out, "report.json");
    assert_eq!(report["mu"][0].as_f64(), Some(0.0));
    let w = rows(&out, "weights.csv");
    let w0: f64 = w[0][4].parse().unwrap();
    assert!(w.iter().all(|r| r[4].parse::<f64>().unwrap() == w0));
    assert!((w0 * w.len() as f64 - 1.0).abs() < 1e-12);
}

#[test]
fn fit_meets_the_target_and_reports_cross_validation() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    let data = tmp.path().join("g");
    ok(&["generate", "franke", "--n-clean", "300", "--n-outliers", "30", "--out", data.to_str().unwrap()]);
    ok(&[
        "fit",
        "--data",
        &path(&data, "franke.csv"),
        "--reference",
        "franke",
        "--r",
        "50",
        "--n1",
        "7",
        "--n2",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let summary = rows(&out, "summary.csv");
    assert_eq!(summary.len(), 2);
    let col = |r: usize, c: usize| summary[r][c].parse::<f64>().unwrap();
    let (ols_mse, target, weighted) = (col(0, 2), col(1, 2), col(1, 3));
    assert!((ols_mse / target - 50.0).abs() < 1e-9);
    assert!((weighted - target).abs() <= 1e-6 * target);
    assert!(col(1, 7) < col(0, 7), "outlier suppression improves the cross-validation error");
    let w = rows(&out, "weights.csv");
    assert_eq!(w.len(), 330);
    assert_eq!(w[0].len(), 5, "no flag column for a plain CSV");
    let model = json(&out, "model.json");
    // 7 control rows of degree 3 need 11 knots
    assert_eq!(model["spec"]["knots_u"]["knots"].as_array().unwrap().len(), 11);
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"solver": {"r": 2, "speed": 3}}"#).unwrap();
    let out = mewls(&["fit", "--config", cfg.to_str().unwrap(), "--out", &path(tmp.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("speed"));

    fs::write(&cfg, r#"{"command": "restore"}"#).unwrap();
    let out = mewls(&["fit", "--config", cfg.to_str().unwrap(), "--out", &path(tmp.path(), "o")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_target_exits_with_solver_code_and_failure_report() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let res = mewls(&["fit", "--generator", "sphere", "--schedule", "direct", "--r", "1000", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let failure = json(&out, "failure.json");
    assert_eq!(failure["stage"].as_u64(), Some(1));
    assert_eq!(failure["reduction"].as_f64(), Some(1000.0));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    let out = tmp.path().join("o");
    fs::write(
        &cfg,
        r#"{"command": "fit", "solver": {"r": 3}, "franke": {"n_clean": 150, "n_outliers": 10}, "spline": {"n1": 6, "n2": 6}}"#,
    )
    .unwrap();
    ok(&["fit", "--config", cfg.to_str().unwrap(), "--r", "4", "--out", out.to_str().unwrap()]);
    let manifest = json(&out, "manifest.json");
    assert_eq!(manifest["config"]["solver"]["r"].as_f64(), Some(4.0));
    assert_eq!(manifest["config"]["spline"]["n1"].as_u64(), Some(6));
    assert_eq!(manifest["config"]["spline"]["degree"].as_u64(), Some(3));
    assert_eq!(rows(&out, "weights.csv").len(), 160);
}

#[test]
fn diagnose_writes_per_stage_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("d");
    let stdout = ok(&[
        "diagnose",
        "--max-points",
        "150",
        "--n1",
        "6",
        "--n2",
        "6",
        "--reductions",
        "1,2,5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("s* ="));
    let rho = rows(&out, "rho_vs_r.csv");
    let its = rows(&out, "iterations_vs_r.csv");
    assert_eq!(rho.len(), 3);
    assert_eq!(its.len(), 3);
    assert!(rho[0][1].parse::<f64>().unwrap() < 1e-8, "uniform weights at r = 1");
    for r in &rho {
        assert!(r[1].parse::<f64>().unwrap() >= 0.0);
    }
    let d = json(&out, "diagnostics.json");
    assert_eq!(d["points"].as_u64(), Some(150));
    assert_eq!(d["subsampled_from"].as_u64(), Some(1150));
    assert!(d["report"]["s_star"].as_f64().unwrap() <= 0.0);
}

fn small_restore(tmp: &Path) -> std::path::PathBuf {
    let cfg = tmp.join("restore.json");
    fs::write(&cfg, r#"{"phantom": {"size": 64}, "spline": {"n1": 8, "n2": 8}, "solver": {"reductions": [1, 1.5, 2]}}"#).unwrap();
    let out = tmp.join("r");
    ok(&["restore", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    out
}

#[test]
fn restore_writes_mask_sidecar_and_analysis_inputs() {
    let tmp = TempDir::new().unwrap();
    let out = small_restore(tmp.path());
    let mask = json(&out, "mask.json");
    assert_eq!(mask["threshold_div"].as_f64(), Some(10.0));
    assert_eq!(mask["pixels"].as_u64(), Some(64 * 64));
    let flagged = mask["flagged"].as_u64().unwrap() as f64;
    assert!((mask["density"].as_f64().unwrap() - flagged / 4096.0).abs() < 1e-15);
    let score = &mask["phantom"];
    assert!(score["mse_restored"].as_f64().unwrap() < score["mse_corrupted"].as_f64().unwrap());
    assert_eq!(rows(&out, "weights.csv").len(), 4096);
    for f in ["restored.png", "mask.png", "model.json", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    let c = tmp.path().join("c");
    ok(&["contours", "--weights", &path(&out, "weights.csv"), "--out", c.to_str().unwrap()]);
    let lines: serde_json::Value = json(&c, "contours.json");
    assert!(!lines.as_array().unwrap().is_empty());

    let fd = tmp.path().join("fd");
    ok(&["fractal-dim", "--mask", &path(&out, "mask.png"), "--out", fd.to_str().unwrap()]);
    let dim = json(&fd, "fractal.json")["dimension"].as_f64().unwrap();
    assert!((0.5..=2.0).contains(&dim));

    let both = mewls(&["fractal-dim", "--out", fd.to_str().unwrap()]);
    assert_eq!(both.status.code(), Some(2));
}
