use std::path::Path;
use std::process::{Command, Output};

fn metahit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metahit")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn entry(chain: &serde_json::Value, x: usize, y: usize) -> f64 {
    chain["rows"][x]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e[0].as_u64() == Some(y as u64))
        .map(|e| e[1].as_f64().unwrap())
        .unwrap_or(0.0)
}

#[test]
fn model_writes_abc_example_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = metahit(&["model", "--preset", "abc-ex1", "--L", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let chain = json(&out);
    assert_eq!(chain["n"], 201);
    let expected = 0.5 * 200f64.powf(-1.75);
    approx::assert_relative_eq!(entry(&chain, 198, 199), expected, max_relative = 1e-12);
}

#[test]
fn model_h_preset_has_four_states() {
    let o = metahit(&["model", "--preset", "h", "--p", "0.001"]);
    assert!(o.status.success());
    let chain: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(chain["n"], 4);
}

#[test]
fn model_rejects_short_abc() {
    let o = metahit(&["model", "--preset", "abc-ex1", "--L", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("L"));
}

#[test]
fn analyze_h_preset_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let o = metahit(&["analyze", "--preset", "h", "--p", "1e-3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&out);
    assert_eq!(r["n_states"], 4);
    assert_eq!(r["pair"]["x0"], 1);
    assert!(r["hitting"]["mean"].as_f64().unwrap() > 1000.0);
    assert!(r["certificate"]["R"].as_u64().unwrap() > 0);
    assert_eq!(r["exponential_law"]["status"], "verified");
    assert_eq!(r["exponential_law"]["passed"], true);
    assert!(r["lemmas"]["checks"].as_array().unwrap().len() > 5);
    assert!(r["implications"]["checks"].as_array().is_some());
}

#[test]
fn analyze_rejects_start_in_target() {
    let o = metahit(&["analyze", "--preset", "h", "--x0", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_chain_file_needs_pair() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    assert!(metahit(&["model", "--preset", "h", "--out", model.to_str().unwrap()]).status.success());
    let o = metahit(&["analyze", "--chain", model.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = metahit(&["analyze", "--chain", model.to_str().unwrap(), "--x0", "1", "--target", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn sweep_abc_example_two_slope() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("s.csv");
    let json_path = dir.path().join("s.json");
    let o = metahit(&[
        "sweep",
        "--family",
        "abc-ex2",
        "--grid",
        "64,128,256,512,1024",
        "--csv",
        csv_path.to_str().unwrap(),
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&json_path);
    let slope = r["sweep"]["fits"]["T_E"]["slope"].as_f64().unwrap();
    assert!((slope - 2.5).abs() < 0.05, "slope {slope}");

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header[..4], ["param", "n_states", "size", "T_E"]);
    assert_eq!(header.last().unwrap(), "hp_g_q");
    assert_eq!(reader.records().count(), 5);
}

#[test]
fn sweep_rejects_short_grid() {
    assert_eq!(metahit(&["sweep", "--family", "h"]).status.code(), Some(2));
    assert_eq!(metahit(&["sweep", "--family", "h", "--grid", "0.01,0.001"]).status.code(), Some(2));
    assert_eq!(metahit(&["sweep", "--family", "nope", "--grid", "1,2,3,4"]).status.code(), Some(2));
}

#[test]
fn verify_passes_on_h_preset() {
    let o = metahit(&["verify", "--preset", "h"]);
    assert!(o.status.success(), "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("all checks passed"));
}

#[test]
fn verify_rejects_bad_row_sum() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    assert!(metahit(&["model", "--preset", "h", "--out", model.to_str().unwrap()]).status.success());
    let mut chain = json(&model);
    let row = chain["rows"][0].as_array_mut().unwrap();
    let last = row.last_mut().unwrap();
    last[1] = serde_json::json!(last[1].as_f64().unwrap() - 0.01);
    std::fs::write(&model, chain.to_string()).unwrap();
    let o = metahit(&["verify", "--chain", model.to_str().unwrap(), "--x0", "1", "--target", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_runs_only_selected_suites() {
    let o = metahit(&["verify", "--preset", "h", "--suite", "network"]);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("RLT"));
    assert!(!out.contains("kl2_lower"));
    assert!(!out.contains("envelope"));
}

#[test]
fn config_file_supplies_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": {"preset": "h", "p": 0.001}}"#).unwrap();
    let o = metahit(&["--config", cfg.to_str().unwrap(), "model"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let direct = metahit(&["model", "--preset", "h", "--p", "0.001"]);
    assert_eq!(o.stdout, direct.stdout);

    std::fs::write(&cfg, r#"{"modle": {}}"#).unwrap();
    assert_eq!(metahit(&["--config", cfg.to_str().unwrap(), "model"]).status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_metahit"))
            .env("METAHIT_WORKERS", workers)
            .args(["simulate", "--preset", "h", "--count", "2000", "--seed", "9", "--format", "bin", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.bin", "1");
    let b = run("b.bin", "3");
    assert_eq!(a, b);
    assert_eq!(&a[..8], b"MHSAMP01");
}

#[test]
fn simulate_rejects_zero_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = metahit(&["simulate", "--preset", "h", "--count", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_worker_count_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_metahit"))
        .env("METAHIT_WORKERS", "zero")
        .args(["model", "--preset", "h"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
