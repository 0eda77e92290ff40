use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_depbernstein"));
    cmd.env_remove("DEPBERNSTEIN_OUTPUT_DIR");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bound_tail_json_embeds_config() {
    let out = run(&["bound", "--kind", "tail", "--n", "1024", "--d", "4", "--M", "1", "--v", "0.8", "--c", "0.7", "--x", "0,100000"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["schema"], "depbernstein/1");
    assert_eq!(doc["config"]["inputs"]["n"], 1024);
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows[0]["certified_bound"], 4.0);
    assert!(rows[1]["certified_bound"].as_f64().unwrap() < 1e-6);
}

#[test]
fn bound_csv_has_header() {
    let out = run(&["bound", "--kind", "laplace", "--n", "64", "--d", "2", "--M", "1", "--v", "1", "--c", "1", "--t", "0,1e-4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,master_log_laplace"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(first[1], 2f64.ln());
}

#[test]
fn bound_batch_appends_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rows.csv");
    fs::write(&input, "label,n,d,M,v,c,x\na,256,2,1,1,1,1000\nb,256,2,1,1,1,0\n").unwrap();
    let out = run(&["bound", "--kind", "tail", "--batch", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "label,n,d,M,v,c,x,bound");
    assert!(lines[2].ends_with(",2.0"));
}

#[test]
fn cantor_json_matches_known_values() {
    let doc = stdout_json(&run(&["cantor", "--A", "1000"]));
    let result = &doc["result"];
    assert_eq!(result["ell"], 4);
    assert_eq!(result["n"], serde_json::json!([1000, 475, 226, 108, 51]));
    assert_eq!(result["d"], serde_json::json!([50, 23, 10, 6]));
    assert_eq!(result["K"].as_array().unwrap().len(), 816);
}

#[test]
fn cantor_csv_marks_kept_indices() {
    let out = run(&["cantor", "--A", "100", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let kept = text.lines().skip(1).filter(|l| l.split(',').nth(1) == Some("1")).count();
    assert_eq!(kept, 94);
}

#[test]
fn mixing_csv_with_fit() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    fs::write(&chain, r#"{"P": [[0.75, 0.25], [0.25, 0.75]], "labels": ["a", "b"]}"#).unwrap();
    let out = run(&["mixing", "--chain", chain.to_str().unwrap(), "--beta-k", "1..3", "--fit-c"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,beta_k,envelope");
    assert_eq!(lines[1], "1,0.25,1.0");
    assert_eq!(lines[2].split(',').nth(1), Some("0.125"));
}

#[test]
fn chain_with_unknown_key_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    fs::write(&chain, r#"{"P": [[0.5, 0.5], [0.5, 0.5]], "colour": 1}"#).unwrap();
    let out = run(&["mixing", "--chain", chain.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(run(&["simulate", "--model", "iid", "--n", "8", "--trials", "200"]).status.code(), Some(3));
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(3));
    assert_eq!(run(&["bound", "--kind", "tail", "--n", "1"]).status.code(), Some(3));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_inequalities_passes() {
    let out = run(&["verify", "--suite", "inequalities", "--budget", "120"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["result"]["passed"], true);
    assert!(doc["result"]["violations"].as_array().unwrap().is_empty());
}

fn simulate_to(dir: &Path, name: &str, workers: &str, extra: &[&str]) -> Vec<u8> {
    let path = dir.join(name);
    let status = bin()
        .args(["--workers", workers, "simulate"])
        .args(extra)
        .arg("--out")
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    fs::read(path).unwrap()
}

#[test]
fn simulate_is_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ["--model", "blockcov", "--n", "32", "--trials", "300", "--seed", "11", "--x-grid", "0:20:11"];
    let a = simulate_to(dir.path(), "a.json", "1", &cfg);
    let b = simulate_to(dir.path(), "b.json", "4", &cfg);
    assert_eq!(a, b);
    let replay = simulate_to(dir.path(), "c.json", "2", &["--replay", dir.path().join("a.json").to_str().unwrap()]);
    assert_eq!(a, replay);

    let doc: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["config"]["seed"], 11);
    assert!(doc["config"].get("workers").is_none());
    assert_eq!(doc["result"]["lambda_max_samples"].as_array().unwrap().len(), 300);
    let grid = doc["result"]["tail_grid"].as_array().unwrap();
    assert_eq!(grid.len(), 11);
    for p in grid {
        let (lo, p_hat, hi) = (p["ci_low"].as_f64().unwrap(), p["p_hat"].as_f64().unwrap(), p["ci_high"].as_f64().unwrap());
        assert!(lo <= p_hat && p_hat <= hi);
    }
}

#[test]
fn simulate_with_custom_config_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("model.json");
    fs::write(&config, r#"{"kind": "iid_baseline", "d": 3, "M": 2.0}"#).unwrap();
    let out = run(&[
        "simulate", "--model", "iid", "--config", config.to_str().unwrap(), "--n", "16", "--trials", "100",
        "--seed", "3", "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("x,p_hat,ci_low,ci_high,certified_bound\n"));
    assert_eq!(text.lines().count(), 22);

    let wrong = run(&["simulate", "--model", "contraction", "--config", config.to_str().unwrap(), "--n", "16", "--trials", "100", "--seed", "3"]);
    assert_eq!(wrong.status.code(), Some(3));
}

#[test]
fn output_dir_env_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_depbernstein"))
        .env("DEPBERNSTEIN_OUTPUT_DIR", dir.path())
        .args(["cantor", "--A", "50", "--out", "nested/cantor.json"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.path().join("nested/cantor.json").exists());
}
