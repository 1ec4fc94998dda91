use std::fs;
use std::process::{Command, Output};

fn nvcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvcorr")).args(args).output().unwrap()
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[timing]\nt_p = \"30 parsecs\"\n").unwrap();
    let out = nvcorr(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_files_exit_with_three() {
    assert_eq!(
        nvcorr(&["sweep", "--config", "/nonexistent/x.toml"]).status.code(),
        Some(3)
    );
    assert_eq!(nvcorr(&["fit", "/nonexistent/trace.csv"]).status.code(), Some(3));
}

#[test]
fn malformed_trace_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    fs::write(&csv, "tau_corr_s,signal\n1e-6,oops\n").unwrap();
    let out = nvcorr(&["fit", csv.to_str().unwrap(), "--omega", "1 MHz"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "[timing]\nt_p = \"30 us\"\ntau_corr = \"60us:63us:41\"\n[drive]\nrotation_angles = [\"0\"]\nphi_rf = [\"0\"]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = nvcorr(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = out_dir.join("trace_000.csv");
    let fit = nvcorr(&["fit", trace.to_str().unwrap(), "--json"]);
    assert!(fit.status.success());
    let v: serde_json::Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(v["amplitude"].as_f64().unwrap() > 0.0);
    assert!(v["rms_residual"].as_f64().unwrap() < 1e-6 * v["amplitude"].as_f64().unwrap());
}

#[test]
fn geometry_json_reports_vanishing_transverse_terms() {
    let out = nvcorr(&["geometry", "--depth", "10 nm", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["i_x"].as_f64().unwrap().abs() < 1e-12);
    assert!((v["i_f"].as_f64().unwrap() - 0.972775512642).abs() < 1e-9);
}
