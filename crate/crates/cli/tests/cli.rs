use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const HALF_CELLS: &str = r#"{"d": 1, "period": [1.0], "boxes": [{"corner": [0.0], "sides": [0.5]}]}"#;

fn heatctl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatctl")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json_out(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn json_err(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn constants_example() {
    let dir = tempfile::tempdir().unwrap();
    let e = std::f64::consts::E.to_string();
    let args = ["--K1", e.as_str(), "constants", "--d", "1", "--gamma", "0.5", "--a", "1", "--domain", "cube_periodic", "--L", "1"];
    let v = json_out(&heatctl(dir.path(), &args));
    let c1 = v["result"]["certificate"]["c1"].as_f64().unwrap();
    let expect = 4.0 * std::f64::consts::E * (1.0 + 2f64.ln());
    assert!((c1 - expect).abs() < 1e-12 * expect);
    let bounds = v["result"]["bounds"].as_array().unwrap();
    let ts: Vec<f64> = bounds.iter().map(|b| b["T"].as_f64().unwrap()).collect();
    assert_eq!(ts, vec![0.1, 1.0, 10.0]);
    let lnln: Vec<f64> = bounds.iter().map(|b| b["cost"]["ln_ln"].as_f64().unwrap()).collect();
    assert!(lnln[0] > lnln[1] && lnln[1] > lnln[2]);
    assert!(v["result"]["certificate"]["bound_C"]["ln"].as_f64().unwrap() > 0.0);
    assert_eq!(v["config"]["params"], Value::Null);
    assert_eq!(v["config"]["input"]["K1"].as_f64().unwrap(), std::f64::consts::E);
}

#[test]
fn constants_default_k1_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_out(&heatctl(dir.path(), &["constants", "--d", "2", "--gamma", "0.25", "--a", "1,2", "--domain", "full_space"]));
    assert_eq!(v["config"]["input"]["K1"].as_f64().unwrap(), 3.5);
    assert_eq!(v["config"]["input"]["a"], serde_json::json!([1.0, 2.0]));
}

#[test]
fn constants_from_params_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.json", r#"{"d": 1, "gamma": 1.0, "a": [1.0], "K1": 2.718281828459045, "domain_kind": "full_space"}"#);
    let v = json_out(&heatctl(dir.path(), &["constants", "--params", "p.json"]));
    let c1 = v["result"]["certificate"]["c1"].as_f64().unwrap();
    assert!((c1 - 4.0 * std::f64::consts::E).abs() < 1e-12);
    write(dir.path(), "q.json", r#"{"d": 1, "gamma": 1.0, "a": [1.0], "domain_kind": "full_space", "extra": 0}"#);
    let out = heatctl(dir.path(), &["constants", "--params", "q.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_err(&out)["error"]["kind"], "parse");
}

#[test]
fn thickness_of_half_cells() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "halfcells.json", HALF_CELLS);
    let v = json_out(&heatctl(dir.path(), &["thickness", "--set", "halfcells.json", "--a", "1", "--gamma", "0.5"]));
    assert!((v["result"]["certificate"]["gamma"].as_f64().unwrap() - 0.5).abs() < 1e-14);
    assert_eq!(v["result"]["certificate"]["exact"], true);
    assert_eq!(v["result"]["is_thick"], true);
    let v = json_out(&heatctl(dir.path(), &["--resolution", "100", "thickness", "--set", "halfcells.json", "--a", "1", "--mode", "raster"]));
    let cert = &v["result"]["certificate"];
    assert_eq!(cert["exact"], false);
    assert!(cert["error_bound"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(dir.path(), &["thickness", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = heatctl(dir.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", "{\"d\": 1,\n \"boxes\": [}\n");
    let out = heatctl(dir.path(), &["thickness", "--set", "bad.json", "--a", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = &json_err(&out)["error"];
    assert_eq!(err["kind"], "parse");
    assert_eq!(err["line"], 2);
    assert!(err["column"].as_u64().unwrap() > 0);
    let out = heatctl(dir.path(), &["thickness", "--set", "missing.json", "--a", "1"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_err(&out)["error"]["kind"], "read");
}

#[test]
fn hypothesis_and_numerical_exit_codes_differ() {
    let dir = tempfile::tempdir().unwrap();
    let out = heatctl(dir.path(), &["constants", "--d", "1", "--gamma", "0.5", "--a", "7", "--domain", "cube_dirichlet", "--L", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json_err(&out)["error"]["kind"], "hypothesis-violation");
    write(
        dir.path(),
        "obs.json",
        r#"{"f": {"bc": "periodic", "d": 1, "L": 1.0, "coeffs": [{"k": [1], "re": 1.0}]},
            "omega": {"d": 1, "boxes": []}, "T": 1.0}"#,
    );
    let out = heatctl(dir.path(), &["observability", "--problem", "obs.json"]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(json_err(&out)["error"]["kind"], "indeterminate-ratio");
}

#[test]
fn hum_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "halfcells.json", HALF_CELLS);
    write(
        dir.path(),
        "hum.json",
        r#"{"omega": "halfcells.json", "T": 1.0, "E_max": 256, "basis": {"d": 1, "L": 1.0, "bc": "periodic"}, "a": [1.0]}"#,
    );
    let a = heatctl(dir.path(), &["hum", "--problem", "hum.json", "--trajectory", "traj.csv"]);
    let b = heatctl(dir.path(), &["hum", "--problem", "hum.json", "--trajectory", "traj.csv"]);
    assert_eq!(a.stdout, b.stdout);
    let v = json_out(&a);
    let c = json_out(&heatctl(dir.path(), &["--seed", "7", "hum", "--problem", "hum.json"]));
    assert_ne!(v["result"], c["result"]);
    let sol = &v["result"]["solution"];
    assert_eq!(sol["modes"], 33);
    assert!(sol["terminal_ratio"].as_f64().unwrap() <= 1e-4);
    assert_eq!(v["result"]["bound"]["within_bound"], true);
    assert_eq!(v["config"]["global"]["seed"], 0);
    assert!(v["config"]["input"]["omega"]["boxes"].is_array());
    let traj = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("t,u_norm,v_norm"));
    assert_eq!(lines.count(), 257);
}

#[test]
fn hum_requires_datum_or_basis() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "hum.json", &format!(r#"{{"omega": {HALF_CELLS}, "T": 1.0, "E_max": 4}}"#));
    let out = heatctl(dir.path(), &["hum", "--problem", "hum.json"]);
    assert_eq!(out.status.code(), Some(3));
    write(dir.path(), "hum2.json", &format!(r#"{{"omega": {HALF_CELLS}, "T": 1.0, "E_max": 4, "bogus": 1}}"#));
    assert_eq!(heatctl(dir.path(), &["hum", "--problem", "hum2.json"]).status.code(), Some(3));
}

#[test]
fn observability_within_bound() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "halfcells.json", HALF_CELLS);
    write(
        dir.path(),
        "obs.json",
        r#"{"f": {"bc": "neumann", "d": 1, "L": 1.0, "coeffs": [{"k": [0], "re": 1.0}, {"k": [5], "re": 2.0}]},
            "omega": "halfcells.json", "T": 0.25, "a": [1.0]}"#,
    );
    let v = json_out(&heatctl(dir.path(), &["observability", "--problem", "obs.json"]));
    assert!(v["result"]["report"]["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["bound"]["within_bound"], true);
}

#[test]
fn ls_verify_and_search() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "halfcells.json", HALF_CELLS);
    write(
        dir.path(),
        "ls.json",
        &format!(
            r#"{{"f": {{"bc": "periodic", "d": 1, "L": 1.0, "coeffs": [{{"k": [0], "re": 1.0}}, {{"k": [2], "re": 0.3, "im": 0.1}}]}},
                "set": {HALF_CELLS}, "a": [1.0]}}"#
        ),
    );
    let v = json_out(&heatctl(dir.path(), &["ls-verify", "--instance", "ls.json"]));
    assert_eq!(v["result"]["pass"], true);
    assert!(v["result"]["margin"].as_f64().unwrap() > 0.0);
    let v = json_out(&heatctl(
        dir.path(),
        &["ls-search", "--set", "halfcells.json", "--bc", "periodic", "--e-max", "16", "--a", "1", "--method", "eigensolve"],
    ));
    assert!(v["result"]["bound"]["margin"].as_f64().unwrap() > 0.0);
    assert_eq!(v["result"]["search"]["modes"], 9);
    assert_eq!(heatctl(dir.path(), &["ls-verify"]).status.code(), Some(2));
}

#[test]
fn counterexample_table() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_out(&heatctl(dir.path(), &["counterexample", "--table", "ce.csv"]));
    assert_eq!(v["result"]["ratio_increasing"], true);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 6);
    let table = std::fs::read_to_string(dir.path().join("ce.csv")).unwrap();
    assert!(table.starts_with("k,terminal_norm_sq,observed_energy,ratio,"));
    assert_eq!(table.lines().count(), 7);
    assert!(!table.contains(",-0,"));
}

#[test]
fn sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "empty.json", r#"{"gamma": [], "a": [[1.0]], "T": [1.0], "L": [1.0], "bc": ["periodic"]}"#);
    let out = heatctl(dir.path(), &["sweep", "--spec", "empty.json"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "gamma,a,T,L,bc,c1,ln_C,ln_cost_bound,lnln_cost_bound,cost_ratio,terminal_ratio,status\n"
    );
    write(
        dir.path(),
        "grid.json",
        r#"{"gamma": [0.5], "a": [[1.0]], "T": [0.5, 1.0, 2.0], "L": [1.0, 2.0], "bc": ["periodic"], "template": {"e_max": 9}}"#,
    );
    let out = heatctl(dir.path(), &["sweep", "--spec", "grid.json", "--output", "grid.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r[11] == "ok"));
    let lnln: Vec<f64> = rows.iter().step_by(2).map(|r| r[8].parse().unwrap()).collect();
    assert!(lnln[0] > lnln[1] && lnln[1] > lnln[2]);
    // bound identical across L at fixed T
    assert_eq!(rows[0][8], rows[1][8]);
    let again = heatctl(dir.path(), &["sweep", "--spec", "grid.json"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn sweep_env_worker_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "grid.json", r#"{"gamma": [0.5], "a": [[1.0]], "T": [1.0], "L": [1.0], "bc": ["periodic"]}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .current_dir(dir.path())
        .env("HEATCTL_WORKERS", "zero")
        .args(["sweep", "--spec", "grid.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
