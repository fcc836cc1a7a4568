use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kreinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kreinlab"))
        .args(args)
        .env("KREINLAB_LOG", "off")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn single_point_minimize_reports_three_quarters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "minimize.json",
        r#"{ "kind": "minimize", "seed": 1, "params": { "points": 1, "particles": 1 } }"#,
    );
    let out = dir.path().join("out");
    let res = kreinlab(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let action = manifest["summary"]["final_action"].as_f64().unwrap();
    assert!((action - 0.75).abs() < 1e-12);
    assert_eq!(manifest["config"]["seed"], 1);
    assert!(manifest["wall_time_seconds"].as_f64().is_some());
    assert!(out.join("trace.csv").exists());
}

#[test]
fn malformed_json_exits_one_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"kind\": \"minimize\",\n  \"seed\": \n}");
    let res = kreinlab(&["--config", &cfg]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 4"));
}

#[test]
fn unknown_kind_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.json", r#"{ "kind": "warp", "seed": 1, "params": {} }"#);
    let res = kreinlab(&["--config", &cfg, "--validate"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("warp"));
}

#[test]
fn validate_reports_ok_and_violations() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(
        dir.path(),
        "ok.json",
        r#"{ "kind": "slater", "seed": 2, "params": { "points": 2, "particles": 2 } }"#,
    );
    let res = kreinlab(&["--config", &ok, "--validate"]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&res.stdout).trim(), "ok");

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{ "kind": "mix-scaling", "seed": 2, "params": { "f_list": [0, 2, 4, 8], "strip_width": -2 } }"#,
    );
    let res = kreinlab(&["--config", &bad, "--validate"]);
    assert_eq!(res.status.code(), Some(1));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("params.strip_width"), "{text}");
    assert!(text.contains("params.f_list"), "{text}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_seed_can_come_from_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{ "kind": "slater", "params": { "points": 2, "particles": 2, "samples": 3 } }"#,
    );
    assert_eq!(kreinlab(&["--config", &cfg, "--validate"]).status.code(), Some(1));
    assert_eq!(kreinlab(&["--config", &cfg, "--validate", "--seed", "5"]).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{ "kind": "slater", "seed": 1, "params": { "points": 2, "particles": 2, "samples": 2 } }"#,
    );
    let res = kreinlab(&["--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn reruns_and_thread_counts_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{ "kind": "collapse", "seed": 3, "params": { "l_list": [1, 2, 4], "strips": 2, "particles": 4, "trials": 4 } }"#,
    );
    let mut bodies = Vec::new();
    for (k, threads) in ["1", "3", "1"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let res = kreinlab(&["--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(res.status.code(), Some(0));
        bodies.push(fs::read(out.join("collapse.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    assert_eq!(bodies[0], bodies[2]);
    let text = String::from_utf8(bodies[0].clone()).unwrap();
    assert!(text.starts_with("L,R,stderr,positive\n"));
}
