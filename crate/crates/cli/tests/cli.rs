//! End-to-end tests of the `steerkit` binary: every subcommand, the file
//! formats, the error envelope with its exit codes, and schema validation
//! of the JSON outputs.

use std::path::{Path, PathBuf};
use std::process::Output;

use serde_json::Value;

fn steerkit(args: &[&str]) -> Output {
    steerkit_env(args, &[])
}

fn steerkit_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_steerkit"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(value: &Value, schema_name: &str) {
    let errs = steerkit_cli::schema::validate(value, &schema(schema_name));
    assert!(errs.is_empty(), "schema violations against {schema_name}: {errs:?}");
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const FAST_SCENARIO: &str = r#"{
    "name": "fast",
    "state": { "mix": { "w": 0.951, "visibility": 1.0 } },
    "eps_a": 0.30,
    "eps_b": 0.00252,
    "pair_rate": 2000000.0,
    "steering_time": 20.0,
    "tomo_time": 20.0,
    "seed": 41,
    "n_samples": 60,
    "sd_threshold": 3.0
}"#;

#[test]
fn werner_state_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    let out = steerkit(&["werner", "--mu", "0.951", "-o", state.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&state).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    assert_valid(&value, "state.schema.json");
    assert_eq!(value["basis"], "HH,HV,VH,VV");
    let p11 = value["matrix"][1][1]["re"].as_f64().unwrap();
    assert!((p11 - (0.951 / 2.0 + 0.049 / 4.0)).abs() < 1e-12);

    // Out-of-range mu is a validation-class failure (exit 2).
    let out = steerkit(&["werner", "--mu", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["class"], "domain");
}

#[test]
fn decompose_and_canonical() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    steerkit(&["werner", "--mu", "0.6", "-o", state.to_str().unwrap()]);

    let out = stdout_json(&steerkit(&["decompose", state.to_str().unwrap()]));
    assert_eq!(out["canonical"], false);
    for i in 0..3 {
        let tii = out["t"][i][i].as_f64().unwrap();
        assert!((tii + 0.6).abs() < 1e-12);
    }

    let out = stdout_json(&steerkit(&["canonical", state.to_str().unwrap()]));
    assert_eq!(out["canonical"], true);
    for i in 0..3 {
        for j in 0..3 {
            let tij = out["t"][i][j].as_f64().unwrap();
            if i == j {
                assert!((tij.abs() - 0.6).abs() < 1e-10);
            } else {
                assert!(tij.abs() < 1e-10);
            }
        }
    }
}

#[test]
fn fidelity_and_closest_werner() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    steerkit(&["werner", "--mu", "0.8", "-o", a.to_str().unwrap()]);
    let out = stdout_json(&steerkit(&["fidelity", a.to_str().unwrap(), a.to_str().unwrap()]));
    assert!((out["fidelity"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let out = stdout_json(&steerkit(&["closest-werner", a.to_str().unwrap()]));
    assert!((out["mu_star"].as_f64().unwrap() - 0.8).abs() < 1e-6);
    assert!((out["fid_star"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn check_nonsteer_reproduces_red_triangle_value() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    steerkit(&["werner", "--mu", "0.951", "-o", state.to_str().unwrap()]);
    let out = stdout_json(&steerkit(&[
        "check-nonsteer",
        state.to_str().unwrap(),
        "--eps",
        "0.00252",
    ]));
    assert_valid(&out, "nonsteer_report.schema.json");
    assert!((out["n_value"].as_f64().unwrap() - 0.95478).abs() < 1e-9);
    assert_eq!(out["variant"], "POVM");
    assert_eq!(out["nonsteerable"], true);

    // The PVM variant accepts large epsilon; the POVM one refuses (exit 4).
    let out = steerkit(&[
        "check-nonsteer",
        state.to_str().unwrap(),
        "--eps",
        "0.4",
        "--variant",
        "pvm",
    ]);
    assert!(out.status.success());
    let out = steerkit(&["check-nonsteer", state.to_str().unwrap(), "--eps", "0.4"]);
    assert_eq!(out.status.code(), Some(4));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["class"], "out_of_regime");

    // Corrupt state file: validation error, exit 2.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"basis\": \"XX\", \"matrix\": []}").unwrap();
    let out = steerkit(&["check-nonsteer", bad.to_str().unwrap(), "--eps", "0.01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_command() {
    let out = stdout_json(&steerkit(&["bound", "--n", "6", "--eps-a", "0.1"]));
    assert_valid(&out, "bound.schema.json");
    assert!((out["bound"].as_f64().unwrap() - 1.0).abs() < 1e-7);

    let out = steerkit(&["bound", "--n", "5", "--eps-a", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_tomo_mc_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", FAST_SCENARIO);
    let counts = dir.path().join("counts.csv");

    let out = steerkit(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "-o",
        counts.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(counts.exists());
    let meta = dir.path().join("counts.meta.json");
    assert!(meta.exists());
    let csv = std::fs::read_to_string(&counts).unwrap();
    assert!(csv.starts_with("setting_a,setting_b,a,b,count\n"));

    // Bit-reproducible for the fixed scenario seed.
    let counts2 = dir.path().join("counts2.csv");
    steerkit(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "-o",
        counts2.to_str().unwrap(),
    ]);
    assert_eq!(csv, std::fs::read_to_string(&counts2).unwrap());

    // Reconstruct and compare to the configured source.
    let state = dir.path().join("rec.json");
    let out = steerkit(&["tomo", counts.to_str().unwrap(), "-o", state.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value =
        serde_json::from_str(&std::fs::read_to_string(&state).unwrap()).unwrap();
    assert_valid(&rec, "state.schema.json");
    let out = stdout_json(&steerkit(&["closest-werner", state.to_str().unwrap()]));
    assert!((out["mu_star"].as_f64().unwrap() - 0.951).abs() < 0.01);

    // Monte Carlo: schema-valid, deterministic, honors the thread cap.
    let mc1 = stdout_json(&steerkit(&[
        "mc",
        counts.to_str().unwrap(),
        "--estimator",
        "mu",
        "--samples",
        "50",
        "--seed",
        "7",
    ]));
    assert_valid(&mc1, "mc_summary.schema.json");
    let mc2 = stdout_json(&steerkit_env(
        &["mc", counts.to_str().unwrap(), "--estimator", "mu", "--samples", "50", "--seed", "7"],
        &[("STEERKIT_THREADS", "1")],
    ));
    assert_eq!(mc1, mc2, "MC summary must not depend on thread count");

    let out = steerkit(&["mc", counts.to_str().unwrap(), "--estimator", "n-povm"]);
    assert_eq!(out.status.code(), Some(2), "n-povm without --eps is a domain error");
}

#[test]
fn simulate_steering_and_steer_test() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", FAST_SCENARIO);
    let counts = dir.path().join("steer.csv");
    let out = steerkit(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "-o",
        counts.to_str().unwrap(),
        "--kind",
        "steering",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&counts).unwrap();
    assert!(csv.starts_with("setting,a,b,count\n"));

    let out = stdout_json(&steerkit(&[
        "steer-test",
        counts.to_str().unwrap(),
        "--eps-a",
        "0.30",
    ]));
    let s = out["s"].as_f64().unwrap();
    assert!((s - 0.951).abs() < 0.01, "S = {s}");
    assert_eq!(out["steering_demonstrated"], true);
    assert!(out["sd_margin"].as_f64().unwrap() > 3.0);
}

#[test]
fn verdict_and_figure3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "s.json", FAST_SCENARIO);
    let out_file = dir.path().join("verdict.json");
    let out = steerkit(&[
        "verdict",
        "--scenario",
        scenario.to_str().unwrap(),
        "-o",
        out_file.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let verdict: Value =
        serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_valid(&verdict, "verdict.schema.json");
    assert_eq!(verdict["verdict"]["conclusive"], true);

    // Two-scenario sweep produces the two CSV panels.
    let set = dir.path().join("set");
    std::fs::create_dir(&set).unwrap();
    write_scenario(&set, "a.json", FAST_SCENARIO);
    write_scenario(
        &set,
        "b.json",
        &FAST_SCENARIO.replace("\"fast\"", "\"fast2\"").replace("0.00252", "0.03"),
    );
    let out_dir = dir.path().join("fig3");
    let out = steerkit(&[
        "figure3",
        "--scenario-set",
        set.to_str().unwrap(),
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let steering = std::fs::read_to_string(out_dir.join("figure3_steering.csv")).unwrap();
    assert!(steering.starts_with("scenario,eps_a,s,delta_s,bound\n"));
    assert_eq!(steering.lines().count(), 3);
    let nonsteer = std::fs::read_to_string(out_dir.join("figure3_nonsteer.csv")).unwrap();
    assert!(nonsteer.starts_with("scenario,mu_star,eps_b,n_value,delta_n\n"));
    assert_eq!(nonsteer.lines().count(), 3);
}

#[test]
fn figure_s2_collapse_for_exact_werner() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("state.json");
    steerkit(&["werner", "--mu", "0.951", "-o", state.to_str().unwrap()]);
    let prefix = dir.path().join("fig");
    let out = steerkit(&[
        "figure-s2",
        state.to_str().unwrap(),
        "--eps",
        "0.00252",
        "--dirs",
        "625",
        "-o",
        prefix.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let csv = std::fs::read_to_string(format!("{}.csv", prefix.display())).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "b_dot_x,t_norm,is_argmax");
    assert_eq!(lines.len(), 626);
    // Exact Werner input: every row carries the same (0, μ) coordinates.
    for line in &lines[1..] {
        let mut fields = line.split(',');
        let b: f64 = fields.next().unwrap().parse().unwrap();
        let t: f64 = fields.next().unwrap().parse().unwrap();
        assert!(b.abs() < 1e-12);
        assert!((t - 0.951).abs() < 1e-12);
    }

    let svg = std::fs::read_to_string(format!("{}.svg", prefix.display())).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<polyline"));
}
