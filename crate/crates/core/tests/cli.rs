//! End-to-end tests of the `sdpi` binary: output schemas, exit codes, and
//! byte stability.

use std::path::PathBuf;
use std::process::{Command, Output};

fn sdpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdpi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("sdpi-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn compute_dsbs_reports_eta_and_passes() {
    let out = sdpi(&["compute", "dsbs:0.1", "--f", "kl", "--seed", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let eta = report["eta_chi2"].as_f64().unwrap();
    assert!((eta - 0.64).abs() < 1e-12);
    assert!(report["all_pass"].as_bool().unwrap());
    assert!((report["thm2"]["raw"].as_f64().unwrap() - 1.28).abs() < 1e-12);
    assert_eq!(report["thm2"]["clipped"].as_f64().unwrap(), 1.0);
}

#[test]
fn compute_bec_builtin() {
    let out = sdpi(&["compute", "bec:0.3:0.5", "--f", "kl", "--seed", "1"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((report["eta_chi2"].as_f64().unwrap() - 0.7).abs() < 1e-10);
}

#[test]
fn compute_identity_json_channel() {
    let path = tmp_path("identity.json");
    std::fs::write(
        &path,
        r#"{"p_x": [0.5, 0.5], "W": [[1.0, 0.0], [0.0, 1.0]]}"#,
    )
    .unwrap();
    let out = sdpi(&["compute", path.to_str().unwrap(), "--f", "kl"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((report["eta_chi2"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((report["thm2"]["raw"].as_f64().unwrap() - 2.0).abs() < 1e-10);
    assert!(report["all_pass"].as_bool().unwrap());
    std::fs::remove_file(&path).ok();
}

#[test]
fn compute_rejects_non_interior_input_with_exit_2() {
    let path = tmp_path("degenerate.json");
    std::fs::write(
        &path,
        r#"{"p_x": [1.0, 0.0], "W": [[1.0, 0.0], [0.0, 1.0]]}"#,
    )
    .unwrap();
    let out = sdpi(&["compute", path.to_str().unwrap(), "--f", "kl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("interior"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn compute_reports_parse_errors_with_indices() {
    let path = tmp_path("bad.json");
    std::fs::write(
        &path,
        r#"{"p_x": [0.5, 0.5], "W": [[0.9, 0.1], [0.3, 0.2]]}"#,
    )
    .unwrap();
    let out = sdpi(&["compute", path.to_str().unwrap(), "--f", "kl"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("column"), "{err}");
    std::fs::remove_file(&path).ok();
}

#[test]
fn compute_is_byte_stable_for_fixed_seed() {
    let a = sdpi(&["compute", "dsbs:0.25", "--f", "kl", "--seed", "9"]);
    let b = sdpi(&["compute", "dsbs:0.25", "--f", "kl", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn sweep_writes_ordered_csv() {
    let path = tmp_path("sweep.csv");
    let out = sdpi(&[
        "sweep",
        "--family",
        "bsc",
        "--p",
        "0.1:0.9:5",
        "--q",
        "0.2:0.8:4",
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,q,eta_chi2,eta_kl_est,thm3_raw,thm2_raw,thm3_clip,thm2_clip"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let cells: Vec<f64> = row.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 8);
        let (eta, est, t3, t2) = (cells[2], cells[3], cells[4], cells[5]);
        assert!(eta <= est + 1e-6);
        assert!(est <= t3 + 1e-9);
        assert!(t3 <= t2 + 1e-9);
    }
    std::fs::remove_file(&path).ok();
}

#[test]
fn sweep_rejects_boundary_q_grid() {
    let path = tmp_path("never.csv");
    let out = sdpi(&[
        "sweep",
        "--family",
        "bsc",
        "--p",
        "0.1:0.9:3",
        "--q",
        "0.0:1.0:3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_dsbs_row_values() {
    let path = tmp_path("dsbs.csv");
    let out = sdpi(&[
        "sweep",
        "--family",
        "dsbs",
        "--p",
        "0.1:0.5:3",
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let first = text.lines().nth(1).unwrap();
    let cells: Vec<f64> = first.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cells[0], 0.1);
    assert!((cells[2] - 0.64).abs() < 1e-12); // eta_chi2
    let last = text.lines().nth(3).unwrap();
    let cells: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!(cells[2].abs() < 1e-15); // BSC(1/2): everything 0
    assert!(cells[3].abs() < 1e-12);
    std::fs::remove_file(&path).ok();
}

#[test]
fn sweep_format_json_and_compute_rejects_csv() {
    let out_path = tmp_path("sweep-rows.json");
    let out = sdpi(&[
        "sweep",
        "--family",
        "dsbs",
        "--p",
        "0.1:0.3:3",
        "--out",
        out_path.to_str().unwrap(),
        "--format",
        "json",
        "--seed",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let eta: f64 = rows[0]["eta_chi2"].as_str().unwrap().parse().unwrap();
    assert!((eta - 0.64).abs() < 1e-12);
    std::fs::remove_file(&out_path).ok();

    let out = sdpi(&["compute", "dsbs:0.1", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_accepts_json_spec_file() {
    let spec_path = tmp_path("sweep-spec.json");
    std::fs::write(
        &spec_path,
        r#"{"family": "bsc",
            "p": {"start": 0.2, "stop": 0.8, "count": 3},
            "q": {"start": 0.3, "stop": 0.7, "count": 2}}"#,
    )
    .unwrap();
    let out_path = tmp_path("sweep-spec.csv");
    let out = sdpi(&[
        "sweep",
        "--spec",
        spec_path.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 7); // header + 3*2 rows
    std::fs::remove_file(&spec_path).ok();
    std::fs::remove_file(&out_path).ok();
}

#[test]
fn verify_appendix_c_passes() {
    let out = sdpi(&["verify", "appendix_c"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(report["pass"].as_bool().unwrap());
}

#[test]
fn verify_inequalities_small_budget() {
    let out = sdpi(&["verify", "inequalities", "--samples", "300", "--seed", "7"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(report["pass"].as_bool().unwrap());
    assert_eq!(report["suite"].as_str().unwrap(), "inequalities");
}

#[test]
fn verify_unknown_suite_is_input_error() {
    let out = sdpi(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fdiv_kl_with_bracket() {
    let out = sdpi(&["fdiv", "kl", "[0.5,0.5]", "[0.25,0.75]"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.143841).abs() < 1e-6);
    assert!(v["finite"].as_bool().unwrap());
    let bracket = v["kl_bracket"].as_array().unwrap();
    assert!((bracket[1].as_f64().unwrap() - 0.287682).abs() < 1e-6);
    assert!((bracket[2].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn fdiv_tv_disjoint_supports() {
    let out = sdpi(&["fdiv", "tv", "[1.0,0.0]", "[0.0,1.0]"]);
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 1.0);
}

#[test]
fn fdiv_infinite_kl_reports_null_value() {
    let out = sdpi(&["fdiv", "kl", "[1.0,0.0]", "[0.0,1.0]"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert!(v["value"].is_null());
    assert!(!v["finite"].as_bool().unwrap());
}

#[test]
fn fdiv_chi2_identical_is_zero() {
    let out = sdpi(&["fdiv", "chi2", "[0.3,0.7]", "[0.3,0.7]"]);
    let v: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(v["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn optimizer_config_file_is_honored() {
    let path = tmp_path("cfg.json");
    std::fs::write(&path, r#"{"restarts": 4, "max_iters": 50}"#).unwrap();
    let out = sdpi(&[
        "compute",
        "dsbs:0.2",
        "--f",
        "kl",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(
        report["estimate"]["diagnostics"].as_array().unwrap().len(),
        4
    );
    std::fs::remove_file(&path).ok();

    let bad = tmp_path("badcfg.json");
    std::fs::write(&bad, r#"{"restarts": 0}"#).unwrap();
    let out = sdpi(&["compute", "dsbs:0.2", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(&bad).ok();
}
