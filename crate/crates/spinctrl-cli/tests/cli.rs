//! End-to-end tests of the `spinctrl` binary: exit codes, output formats,
//! and agreement with the library.

use std::f64::consts::PI;
use std::process::{Command, Output};

fn spinctrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinctrl"))
        .args(args)
        .env_remove("SPIN_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn parse_csv(text: &str, header: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    lines
        .map(|l| l.split(',').map(|v| v.parse().expect("csv number")).collect())
        .collect()
}

#[test]
fn design_selective_json_and_summary() {
    let dir = tempdir();
    let out_path = dir.join("sel.json");
    let out = spinctrl(&[
        "design-selective",
        "--phi",
        "pi",
        "--delta1",
        "1",
        "--omega0",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("T_S = 5.441398092703"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    let t_s = report["total_time"].as_f64().unwrap();
    assert!((t_s - (4.0 * PI * PI - PI * PI).sqrt()).abs() < 1e-12);
    let amp = report["field"]["segments"][0]["amplitude"].as_f64().unwrap();
    assert!((amp - 1.0 / 3.0_f64.sqrt()).abs() < 1e-12);
}

#[test]
fn design_selective_rejects_offsets_above_delta0() {
    let out = spinctrl(&["design-selective", "--phi", "3.14159", "--delta1", "2", "--omega0", "1"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no admissible singular pulse"), "stderr: {err}");
}

#[test]
fn missing_flag_is_usage_error() {
    let out = spinctrl(&["design-selective", "--phi", "pi", "--omega0", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn design_robust_examples() {
    let out = spinctrl(&[
        "design-robust", "--switches", "2", "--phi", "pi", "--n", "5", "--k", "3", "--alpha", "1",
    ]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let json_start = text.find('{').unwrap();
    let report: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert!((report["total_time"].as_f64().unwrap() - 7.0 * PI / 3.0).abs() < 1e-12);

    let out = spinctrl(&["design-robust", "--switches", "1", "--phi", "pi", "--n", "2", "--k", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let report: serde_json::Value =
        serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    let t1 = report["field"]["segments"][0]["duration"].as_f64().unwrap();
    let t2 = report["field"]["segments"][1]["duration"].as_f64().unwrap();
    assert!((t1 - 3.0 * PI / 2.0).abs() < 1e-12);
    assert!((t2 - PI / 2.0).abs() < 1e-12);

    let out = spinctrl(&["design-robust", "--switches", "2", "--phi", "pi", "--n", "1", "--k", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8(out.stderr).unwrap().contains("degenerate family"));
}

#[test]
fn profile_of_flat_design_and_constant_pulse() {
    let dir = tempdir();
    let report_path = dir.join("r53.json");
    let out = spinctrl(&[
        "design-robust", "--switches", "2", "--phi", "pi", "--n", "5", "--k", "3",
        "--out", report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);

    let out = spinctrl(&[
        "profile", "--field", report_path.to_str().unwrap(), "--target-phi", "pi",
        "--delta-min", "-2", "--delta-max", "2", "--steps", "401",
    ]);
    assert_eq!(code(&out), 0);
    let rows = parse_csv(&stdout(&out), "delta,F");
    assert_eq!(rows.len(), 401);
    let flat = rows
        .iter()
        .filter(|r| r[0].abs() <= 0.25)
        .map(|r| r[1])
        .fold(0.0_f64, f64::max);
    assert!(flat < 0.1, "max F for |delta| <= 0.25 was {flat}");

    // constant pi pulse: F(sqrt(3)) = 8 (antipodal propagator)
    let const_path = dir.join("const.json");
    std::fs::write(
        &const_path,
        r#"{"omega0": 1.0, "segments": [{"amplitude": 1.0, "duration": 3.141592653589793}]}"#,
    )
    .unwrap();
    let out = spinctrl(&[
        "profile", "--field", const_path.to_str().unwrap(), "--target-phi", "pi",
        "--delta-min", "1.7320508075688772", "--delta-max", "2", "--steps", "1",
    ]);
    assert_eq!(code(&out), 0);
    let rows = parse_csv(&stdout(&out), "delta,F");
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 8.0).abs() < 1e-9);
}

#[test]
fn profile_errors() {
    let out = spinctrl(&[
        "profile", "--field", "/nonexistent/field.json", "--target-phi", "pi",
        "--delta-min", "0", "--delta-max", "1", "--steps", "2",
    ]);
    assert_eq!(code(&out), 3);

    let dir = tempdir();
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"omega0": 1.0, "segments": [{"amplitude": 5.0, "duration": 1.0}]}"#)
        .unwrap();
    let out = spinctrl(&[
        "profile", "--field", bad.to_str().unwrap(), "--target-phi", "pi",
        "--delta-min", "0", "--delta-max", "1", "--steps", "2",
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("segment 0"), "stderr: {err}");
}

#[test]
fn landscape_csv_and_determinism_across_threads() {
    let common = [
        "landscape", "--mode", "fig3a", "--t-min", "2", "--t-max", "8", "--t-steps", "3",
        "--axis-min", "0.5", "--axis-max", "1.5", "--axis-steps", "3", "--phi", "pi",
        "--segments", "16", "--restarts", "2", "--max-iters", "120", "--seed", "7",
    ];
    let one = spinctrl(&[&common[..], &["--threads", "1"]].concat());
    let many = spinctrl(&[&common[..], &["--threads", "4"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(code(&many), 0);
    assert_eq!(stdout(&one), stdout(&many), "thread count changed the landscape");
    let rows = parse_csv(&stdout(&one), "T,delta,cost");
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[2].is_finite()));
}

#[test]
fn landscape_zero_area_grid_is_usage_error() {
    let out = spinctrl(&[
        "landscape", "--mode", "fig3a", "--t-min", "2", "--t-max", "2", "--t-steps", "3",
        "--axis-min", "0.5", "--axis-max", "1.5", "--axis-steps", "3", "--phi", "pi",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn landscape_fig3b_uses_phi_axis() {
    let out = spinctrl(&[
        "landscape", "--mode", "fig3b", "--t-min", "3", "--t-max", "6", "--t-steps", "2",
        "--axis-min", "pi/2", "--axis-max", "pi", "--axis-steps", "2", "--delta1", "1",
        "--segments", "16", "--restarts", "1", "--max-iters", "60",
    ]);
    assert_eq!(code(&out), 0);
    let rows = parse_csv(&stdout(&out), "T,phi,cost");
    assert_eq!(rows.len(), 4);
    assert!((rows[0][1] - PI / 2.0).abs() < 1e-9);

    // fig3b without --delta1 is a usage error
    let out = spinctrl(&[
        "landscape", "--mode", "fig3b", "--t-min", "3", "--t-max", "6", "--t-steps", "2",
        "--axis-min", "pi/2", "--axis-max", "pi", "--axis-steps", "2",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn grape_single_point_converges_on_the_valley() {
    let dir = tempdir();
    let field_path = dir.join("g.json");
    // (T, delta) = (sqrt(3) pi, 1): on the low-cost curve
    let out = spinctrl(&[
        "grape", "--mode", "fig3a", "--axis", "1", "--duration", "5.441398092702653",
        "--phi", "pi", "--segments", "32", "--restarts", "3", "--max-iters", "400",
        "--out", field_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let summary = stdout(&out);
    let cost: f64 = summary
        .split("cost = ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(cost < 1e-3, "cost = {cost}");
    let field: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&field_path).unwrap()).unwrap();
    assert_eq!(field["segments"].as_array().unwrap().len(), 32);
}

#[test]
fn pmp_bang_matches_library() {
    let out = spinctrl(&["pmp-bang", "--a", "1", "--omega", "1.5", "--k-max", "3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let p = spinctrl::pmp::SwitchParam::new(1.0, 1.5).unwrap();
    let want = spinctrl::pmp::next_bang_duration(&p).unwrap();
    assert!((v["next_bang_duration"].as_f64().unwrap() - want).abs() < 1e-15);
    assert_eq!(v["singular_crossing_times"].as_array().unwrap().len(), 3);
}

#[test]
fn bad_spin_threads_is_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_spinctrl"))
        .args(["pmp-bang", "--a", "1", "--omega", "1"])
        .env("SPIN_THREADS", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "spinctrl-cli-test-{}-{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
