mod common;

use common::run;

fn s(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["generate", "--bogus"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("benchmark"));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let r = run(&["generate", "--n", "100", "--positive-rate", "1.5", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error:"));

    let missing = dir.path().join("missing.csv");
    let r = run(&["benchmark", "--data", s(&missing)]);
    assert_eq!(r.status.code(), Some(1));

    assert_eq!(run(&["--threads", "0", "edge-sim", "--duration", "10"]).status.code(), Some(1));
}

#[test]
fn generate_writes_csv_and_manifest_then_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fleet.csv");
    let r = run(&["--format", "json", "generate", "--n", "300", "--out", s(&out), "--seed", "9"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(summary["n_records"], 300);

    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 301);

    let manifest = dir.path().join("fleet.csv.manifest.json");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "generate");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["dataset_sha256"][0], summary["dataset_sha256"]);

    let v = run(&["verify", s(&manifest)]);
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stdout));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (p, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(run(&["generate", "--n", "200", "--seed", seed, "--out", s(p)]).status.success());
    }
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn verify_detects_tampered_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fleet.csv");
    assert!(run(&["generate", "--n", "150", "--out", s(&out)]).status.success());
    let manifest = dir.path().join("fleet.csv.manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(run(&["verify", s(&manifest)]).status.code(), Some(1));
}

#[test]
fn train_then_evaluate_and_explain() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fleet.csv");
    let model = dir.path().join("model.json");
    assert!(run(&["generate", "--n", "400", "--out", s(&data)]).status.success());
    let r = run(&["train", "--data", s(&data), "--model", "logistic", "--out", s(&model)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));

    let r = run(&["--format", "json", "evaluate", "--model", s(&model), "--data", s(&data)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let eval: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(eval["rows"], 400);

    // Logistic models carry no trees to attribute.
    let r = run(&["explain", "--data", s(&data), "--model", s(&model)]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn edge_sim_output_is_labelled_modelled() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("edge");
    let r = run(&["edge-sim", "--duration", "60", "--alerts", "200", "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains(ctxmaint_edgesim::MODELLED_LABEL));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains(ctxmaint_edgesim::MODELLED_LABEL));
    let frames = std::fs::read_to_string(out.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 61);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn surrogate_ai4i_file_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_surrogate(dir.path(), 600, 1);
    let model = dir.path().join("m.json");
    let r = run(&["train", "--data", s(&data), "--model", "logistic", "--out", s(&model)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let saved = std::fs::read_to_string(&model).unwrap();
    assert!(saved.contains("tool_wear"));
}
