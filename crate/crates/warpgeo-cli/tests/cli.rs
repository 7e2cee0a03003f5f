//! Runs the `warpgeo` binary end to end.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn warpgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_warpgeo")).args(args).output().expect("binary runs")
}

fn json_stdout(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn error_line(o: &Output) -> Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let line = err.lines().find(|l| l.starts_with('{')).expect("machine-readable error line");
    serde_json::from_str(line).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn volume_defaults_match_limit() {
    let o = warpgeo(&["volume"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["schema"], "warpgeo.report.v1");
    assert_eq!(v["status"], "ok");
    let limit = v["result"]["limit"]["value"].as_f64().unwrap();
    let closed = 4.0 * PI * PI * (8.0 - 2.0 * 4f64.ln());
    assert!((limit - closed).abs() < 1e-6);
    assert!((limit - 206.3699).abs() < 1e-4);
    let cal = v["result"]["constant_calibration"].as_f64().unwrap();
    assert!((cal - 78.9568).abs() < 1e-4);
    assert_eq!(v["config"]["tolerances"]["volume"], 1e-6);
}

#[test]
fn volume_at_larger_beta() {
    let o = warpgeo(&["volume", "--beta", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let limit = json_stdout(&o)["result"]["closed_form"].as_f64().unwrap();
    assert!((limit - 4.0 * PI * PI * (14.0 - 2.0 * 4f64.ln())).abs() < 1e-9);
}

#[test]
fn short_schedule_fails_volume_tolerance_with_witness() {
    let o = warpgeo(&["volume", "--jmax", "3"]);
    assert_eq!(o.status.code(), Some(4));
    let v = json_stdout(&o);
    assert_eq!(v["status"], "invariant_failure");
    assert_eq!(v["witnesses"][0]["kind"], "final_deficit");
}

#[test]
fn csv_output_has_header_and_rows() {
    let o = warpgeo(&["volume", "--format", "csv", "--jmax", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema=warpgeo.report.v1 command=volume"));
    assert!(text.contains("# tolerances={"));
    assert!(text.contains("\nj,a,volume,deficit\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 22);
}

#[test]
fn pole_to_pole_bracket_contains_pi() {
    let o = warpgeo(&["dist", "--grid", "24x24x24", "--pair", "0,0,0 3.141592653589793,0,0", "--a", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let b = &json_stdout(&o)["result"]["brackets"][0];
    let (lo, hi) = (b["lower"].as_f64().unwrap(), b["upper"].as_f64().unwrap());
    assert!(lo <= PI + 1e-12 && PI <= hi + 1e-12 && hi - lo < 1e-9, "{b}");
}

#[test]
fn equator_fiber_sweep_is_monotone() {
    let o = warpgeo(&["dist", "--sweep", "--grid", "24", "--jmax", "6", "--pair", "1.5707963267948966 0 0 1.5707963267948966 0 3.141592653589793"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    let pair = &v["result"]["pairs"][0];
    assert_eq!(pair["monotone"], true);
    let upper: Vec<f64> = pair["upper"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(upper.len(), 7);
    assert!(upper.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn malformed_pair_file_reports_lines() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pairs.txt");
    std::fs::write(&file, "# ok\n0 0 0 1 1 1\n0 0 0 1 1\n5 0 0 1 1 1\n").unwrap();
    let o = warpgeo(&["dist", "--pairs", path(&file)]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["status"], "config_error");
    let lines: Vec<u64> = e["witness"]["lines"].as_array().unwrap().iter().map(|l| l["line"].as_u64().unwrap()).collect();
    assert_eq!(lines, vec![3, 4]);
}

#[test]
fn pair_file_and_manifest_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("pairs.txt");
    std::fs::write(&file, "1 0 0 2 0 0\n1 0 0 1 0 1\n").unwrap();
    let o = warpgeo(&["dist", "--grid", "16", "--pairs", path(&file), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("pair,p_r,p_theta,p_phi,q_r,q_theta,q_phi,lower,upper"));
    let manifest = dir.path().join("batch.json");
    std::fs::write(
        &manifest,
        r#"{"warp":{"kind":"constant","c":1.0},"spec":{"n_r":16,"n_theta":16,"n_phi":16},"pairs":[[[1.0,0.0,0.0],[2.0,0.0,0.0]]]}"#,
    )
    .unwrap();
    let o = warpgeo(&["dist", "--pairs", path(&manifest)]);
    assert_eq!(o.status.code(), Some(0));
    let r = &json_stdout(&o)["result"]["batch"];
    assert_eq!(r["schema"], "warpgeo.batch.v1");
    assert!((r["results"][0]["upper"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn extreme_warp_on_full_grid_is_a_solver_error() {
    let o = warpgeo(&["dist", "--warp", "extreme", "--grid", "16", "--pair", "1 0 0 2 0 0"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["status"], "solver_error");
}

#[test]
fn config_files_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("exp.toml");
    std::fs::write(&toml_path, "schema = \"warpgeo.config.v1\"\nbeta = 3.0\nseed = 9\n[schedule]\njmax = 20\n").unwrap();
    let o = warpgeo(&["volume", "--config", path(&toml_path)]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["config"]["beta"], 3.0);
    assert_eq!(v["seed"], 9);
    let json_path = dir.path().join("exp.json");
    std::fs::write(&json_path, r#"{"schema":"warpgeo.config.v1","beta":2.5}"#).unwrap();
    let o = warpgeo(&["volume", "--config", path(&json_path)]);
    assert_eq!(json_stdout(&o)["config"]["beta"], 2.5);
}

#[test]
fn invalid_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema = \"warpgeo.config.v0\"\n").unwrap();
    let o = warpgeo(&["volume", "--config", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o)["error"].as_str().unwrap().contains("schema"));
    std::fs::write(&bad, "beta = 2.0\nunknown_key = 1\n").unwrap();
    assert_eq!(warpgeo(&["volume", "--config", path(&bad)]).status.code(), Some(2));
    assert_eq!(warpgeo(&["volume", "--beta", "1.5"]).status.code(), Some(2));
    assert_eq!(warpgeo(&["volume", "--grid", "8x8"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_warpgeo")).arg("volume").env("WARPGEO_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = Command::new(env!("CARGO_BIN_EXE_warpgeo"))
            .args(["converge", "--preset", "small", "--seed", "4", "--out", path(&out)])
            .env("WARPGEO_THREADS", "1")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn converge_small_preset_and_forced_failure() {
    let o = warpgeo(&["converge", "--preset", "small"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert!(v["result"]["final_gap"].as_f64().unwrap() < 0.05);
    assert_eq!(v["result"]["converged"], true);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "[tolerances]\nuniform = 1e-12\n").unwrap();
    let o = warpgeo(&["converge", "--preset", "small", "--config", path(&cfg)]);
    assert_eq!(o.status.code(), Some(4));
    let v = json_stdout(&o);
    assert!(v["witnesses"].as_array().unwrap().iter().any(|w| w["kind"] == "final_gap"));
}

#[test]
fn hausdorff_verdict() {
    let o = warpgeo(&["hausdorff"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert_eq!(v["result"]["verdict"], "dim(S) = 1, H¹ = ∞");
    assert_eq!(v["result"]["partition"]["certifies_infinite"], true);
}

#[test]
fn bounds_sweep_holds() {
    let o = warpgeo(&["bounds", "--grid", "16", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("radius,bound,estimate,estimate_certified,eps_grid,holds"));
    assert_eq!(text.lines().filter(|l| l.ends_with(",true")).count(), 4);
}

#[test]
fn sweep_table_defaults_to_equator_pair() {
    let o = warpgeo(&["sweep", "--grid", "16", "--jmax", "5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("j,a,volume,fiber_length,pair,lower,upper"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);
}
