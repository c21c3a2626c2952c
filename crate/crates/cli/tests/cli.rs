//! Binary-level tests: exit codes, file outputs, determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn robinv() -> Command {
    Command::new(env!("CARGO_BIN_EXE_robinv"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// A small well-formed model file: identity forward map, one perturbation.
fn model_json(m: usize, sigma: f64) -> String {
    let eye: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut perturb = vec![vec![0.0; m]; m];
    perturb[0][1] = 0.1;
    serde_json::json!({
        "A": eye,
        "A_alpha": [perturb],
        "B": eye,
        "sigma": sigma,
        "noise_law": {"kind": "gaussian"},
        "perturbation_law": {"kind": "gaussian"},
    })
    .to_string()
}

#[test]
fn experiment_deconv_writes_summary_and_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let status = robinv()
            .args([
                "experiment",
                "deconv",
                "--gamma",
                "0.05",
                "--eps",
                "0.05",
                "--n-mc",
                "8",
                "--seed",
                "7",
                "--n",
                "8",
                "--m",
                "8",
                "--nu",
                "4",
                "--trials",
                "4",
                "--out-dir",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        assert!(out.join("summary.json").exists());
        assert!(out.join("errors_robust_g0.csv").exists());
    }
    for name in ["errors_robust_g0.csv", "errors_nominal_g0.csv", "errors_poly_g0.csv"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically seeded runs");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["results"].as_array().unwrap().len(), 1);
    assert!(summary["results"][0]["robust_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn certify_zero_contrast_reports_bias_only_bound() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    write(&model_path, &model_json(3, 0.0));
    // zero contrast, B = I over the default unit ball: bias-only bound 1
    let h_path = dir.path().join("h.json");
    write(
        &h_path,
        &serde_json::json!({"rows": [[0.0,0.0,0.0],[0.0,0.0,0.0],[0.0,0.0,0.0]]}).to_string(),
    );
    let out = robinv()
        .args(["certify", "--kind", "linear", "--eps", "0.05"])
        .arg("--model")
        .arg(&model_path)
        .arg("--h")
        .arg(&h_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let val: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bound = val["bound"].as_f64().unwrap();
    assert!((bound - 1.0).abs() < 1e-5, "bias-only bound {bound}");
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("nope.json");
    let out = robinv()
        .args(["synth-linear", "--model"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let malformed = dir.path().join("bad.json");
    write(&malformed, "{ not json");
    let out = robinv()
        .args(["synth-linear", "--model"])
        .arg(&malformed)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_linear_emits_h_and_recertifies() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    write(&model_path, &model_json(3, 0.01));
    let out_dir = dir.path().join("out");
    let out = robinv()
        .args(["synth-linear", "--eps", "0.05", "--out-dir"])
        .arg(&out_dir)
        .arg("--model")
        .arg(&model_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("h.json").exists());
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let bound = summary["bound"].as_f64().unwrap();
    assert!(bound > 0.0 && bound < 1.0, "bound {bound}");

    // the written contrast certifies back to the same bound
    let out2 = robinv()
        .args(["certify", "--kind", "linear", "--eps", "0.05"])
        .arg("--model")
        .arg(&model_path)
        .arg("--h")
        .arg(out_dir.join("h.json"))
        .output()
        .unwrap();
    assert!(out2.status.success());
    let val: serde_json::Value = serde_json::from_slice(&out2.stdout).unwrap();
    let recert = val["bound"].as_f64().unwrap();
    assert!((recert - bound).abs() <= 1e-6 * bound.max(1.0));
}

#[test]
fn synth_poly_ball_runs_and_risk_eval_consumes_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let model_path = dir.path().join("model.json");
    write(&model_path, &model_json(4, 0.05));
    let out_dir = dir.path().join("out");
    let out = robinv()
        .args([
            "synth-poly-ball",
            "--eps",
            "0.05",
            "--trials",
            "6",
            "--seed",
            "3",
            "--out-dir",
        ])
        .arg(&out_dir)
        .arg("--model")
        .arg(&model_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["certified_bound"].as_f64().unwrap() <= summary["risk_bound"].as_f64().unwrap());
    let contrast = out_dir.join("contrast.json");
    assert!(contrast.exists());

    let out = robinv()
        .args([
            "risk-eval", "--kind", "poly", "--eps", "0.05", "--n-mc", "10", "--seed", "4",
        ])
        .arg("--model")
        .arg(&model_path)
        .arg("--h")
        .arg(&contrast)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let val: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(val["quantiles"].as_array().unwrap().len(), 3);
}

#[test]
fn robust_norm_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let unc = dir.path().join("unc.json");
    write(
        &unc,
        &serde_json::json!({
            "scalar_blocks": [[[1.0, 0.0],[0.0, 1.0]]],
            "general_blocks": []
        })
        .to_string(),
    );
    let ball = dir.path().join("ball.json");
    write(
        &ball,
        &serde_json::json!({
            "T": [[[1.0, 0.0],[0.0, 1.0]]],
            "base": {"kind": "box", "K": 1}
        })
        .to_string(),
    );
    let out = robinv()
        .args(["robust-norm", "--budget", "40"])
        .arg("--uncertainty")
        .arg(&unc)
        .arg("--x")
        .arg(&ball)
        .arg("--bstar")
        .arg(&ball)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let val: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let opt = val["opt"].as_f64().unwrap();
    let oracle = val["oracle_lower_bound"].as_f64().unwrap();
    assert!(opt >= oracle - 1e-6);
    assert!(opt >= 1.0 - 1e-6 && opt <= 2.0 + 1e-3);
}
