use std::process::{Command, Output};

use serde_json::Value;

fn neflab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neflab"))
        .args(args)
        .env_remove("NEFLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn schema() -> jsonschema::Validator {
    let out = neflab(&["--schema"]);
    assert_eq!(code(&out), 0);
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

/// Runs a command expected to succeed and validates its JSON.
fn json_ok(validator: &jsonschema::Validator, args: &[&str]) -> Value {
    let out = neflab(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{args:?} violates the schema: {errors:#?}");
    doc
}

#[test]
fn every_command_matches_the_schema() {
    let v = schema();
    let cases: &[&[&str]] = &[
        &["catalog", "list"],
        &["catalog", "show", "binomial", "--param", "trials=3"],
        &["eval", "--family", "gamma", "--theta", "-1", "--mean", "2"],
        &["eval", "--family", "quartic", "--mean", "0.5"],
        &["transform", "--family", "poisson", "--beta", "1"],
        &["transform", "--family", "cubic-poisson", "--beta", "1", "--inverse"],
        &["verify", "--family", "poisson"],
        &["verify", "--family", "cubic-normal", "--beta", "1"],
        &["verify", "--family", "inverse-gaussian", "--properties", "1,2"],
        &["priors", "--family", "normal", "--family-tag", "pi", "--t", "2", "--m0", "0.5", "--a", "1", "--b", "0.5"],
        &["priors", "--family", "gamma", "--family-tag", "pi-star", "--t", "3", "--m0", "1"],
        &["priors", "--family", "poisson", "--family-tag", "pi-tilde", "--beta", "1", "--t", "2", "--m0", "1"],
        &["ode", "solve", "--beta", "1", "--a", "0.5", "--b", "-1", "--lambda", "2"],
        &["ode", "match", "--poly", "-1,3,-3,1", "--beta", "-1"],
        &["ode", "match", "--poly", "0,0,0,1", "--beta", "1"],
        &["ode", "integrate", "--beta", "1", "--a", "0", "--b", "0", "--v0", "1", "--m0", "0", "--span", "1"],
        &["battery"],
    ];
    for args in cases {
        json_ok(&v, args);
    }
}

#[test]
fn seed_is_echoed_and_reports_are_deterministic() {
    let v = schema();
    let a = json_ok(&v, &["--seed", "17", "verify", "--family", "cubic-poisson"]);
    let b = json_ok(&v, &["verify", "--family", "cubic-poisson", "--seed", "17"]);
    assert_eq!(a["seed"], 17);
    assert_eq!(a["result"]["seed"], 17);
    assert_eq!(a, b);
    let other = json_ok(&v, &["--seed", "18", "verify", "--family", "cubic-poisson"]);
    assert_eq!(other["result"]["pass"], a["result"]["pass"]);
}

#[test]
fn battery_output_is_independent_of_thread_count() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_neflab"))
            .args(["battery", "--format", "csv"])
            .env("NEFLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    let text = String::from_utf8(one.stdout).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("true")), "{text}");
}

#[test]
fn raw_inverse_gaussian_fails_with_exit_zero() {
    let v = schema();
    let doc = json_ok(&v, &["verify", "--family", "inverse-gaussian", "--beta", "auto"]);
    assert_eq!(doc["result"]["pass"], false);
    assert_eq!(doc["result"]["agreement"], true);
}

#[test]
fn verify_csv_lists_point_residuals() {
    let out = neflab(&["verify", "--family", "poisson", "--format", "csv", "--grid", "6"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("attempt,beta,property,point,residual"));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().any(|r| r.contains(",P1,")));
    assert!(rows.iter().any(|r| r.contains(",P2,")));
}

#[test]
fn priors_csv_has_a_row_per_grid_point() {
    let out = neflab(&["priors", "--family", "normal", "--family-tag", "pi", "--t", "1", "--m0", "0", "--grid", "7", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("x0,log_density"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn descriptor_files_round_trip_through_transform() {
    let v = schema();
    let doc = json_ok(&v, &["transform", "--family", "poisson", "--beta", "0.5"]);
    let dir = std::env::temp_dir().join(format!("neflab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cubic.json");
    std::fs::write(&path, serde_json::to_string(&doc["result"]["descriptor"]).unwrap()).unwrap();
    let p = path.to_str().unwrap();
    let verdict = json_ok(&v, &["verify", "--family", p, "--beta", "0.5", "--grid", "12"]);
    assert_eq!(verdict["result"]["pass"], true);
    let back = json_ok(&v, &["transform", "--family", p, "--beta", "0.5", "--inverse"]);
    assert_eq!(back["result"]["inverse"], true);
    let bad = neflab(&["eval", "--family", p, "--param", "x=1", "--theta", "0"]);
    assert_eq!(code(&bad), 1);
    let envelope = dir.join("envelope.json");
    std::fs::write(&envelope, serde_json::to_string(&doc).unwrap()).unwrap();
    let again = json_ok(&v, &["verify", "--family", envelope.to_str().unwrap(), "--beta", "0.5", "--grid", "12"]);
    assert_eq!(again["result"]["pass"], true);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(code(&neflab(&[])), 1);
    assert_eq!(code(&neflab(&["frobnicate"])), 1);
    assert_eq!(code(&neflab(&["verify"])), 1);
    assert_eq!(code(&neflab(&["--help"])), 0);
    assert_eq!(code(&neflab(&["--version"])), 0);
    // validation errors
    assert_eq!(code(&neflab(&["eval", "--family", "no-such-family", "--theta", "0"])), 1);
    assert_eq!(code(&neflab(&["eval", "--family", "poisson", "--theta", "0,1"])), 1);
    assert_eq!(code(&neflab(&["eval", "--family", "gamma", "--theta", "1"])), 1);
    assert_eq!(code(&neflab(&["transform", "--family", "poisson", "--beta", "0"])), 1);
    assert_eq!(code(&neflab(&["verify", "--family", "poisson", "--grid", "2"])), 1);
    assert_eq!(code(&neflab(&["verify", "--family", "poisson", "--properties", "4"])), 1);
    assert_eq!(code(&neflab(&["priors", "--family", "poisson", "--family-tag", "pi", "--t", "-1", "--m0", "1"])), 1);
    assert_eq!(code(&neflab(&["priors", "--family", "poisson", "--family-tag", "pi-tilde", "--t", "1", "--m0", "1"])), 1);
    assert_eq!(code(&neflab(&["ode", "solve", "--beta", "0", "--a", "0", "--b", "0", "--lambda", "1"])), 1);
    assert_eq!(code(&neflab(&["ode", "match", "--poly", "1,0,0,0,1", "--beta", "1"])), 1);
    // numerical failures
    let sing = neflab(&["ode", "integrate", "--beta", "1", "--a", "0", "--b", "0", "--v0", "1", "--m0", "0", "--span", "-2"]);
    assert_eq!(code(&sing), 2);
    assert!(!sing.stderr.is_empty());
    let threads = Command::new(env!("CARGO_BIN_EXE_neflab"))
        .args(["catalog", "list"])
        .env("NEFLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&threads), 1);
}

#[test]
fn ode_match_reports_the_shifted_cube() {
    let v = schema();
    let doc = json_ok(&v, &["ode", "match", "--poly", "-1,3,-3,1", "--beta", "-1"]);
    let p = &doc["result"]["params"];
    assert_eq!(p["beta"], -1.0);
    assert!(p["a"].as_f64().unwrap().abs() < 1e-12);
    assert!(p["b"].as_f64().unwrap().abs() < 1e-12);
    let raw = json_ok(&v, &["ode", "match", "--poly", "0,0,0,1", "--beta", "1"]);
    assert!(raw["result"]["params"].is_null());
}

#[test]
fn eval_agrees_with_closed_forms() {
    let v = schema();
    let doc = json_ok(&v, &["eval", "--family", "poisson", "--theta", "0.5", "--mean", "2"]);
    let pts = doc["result"]["points"].as_array().unwrap();
    let e = 0.5_f64.exp();
    assert!((pts[0]["k"].as_f64().unwrap() - e).abs() < 1e-14);
    assert!((pts[1]["theta"][0].as_f64().unwrap() - 2.0_f64.ln()).abs() < 1e-12);
    assert!((pts[1]["variance"][0][0].as_f64().unwrap() - 2.0).abs() < 1e-10);
}
