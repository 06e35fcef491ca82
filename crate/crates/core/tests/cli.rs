use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fermion-rpa"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("fermion-rpa-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn lists_all_experiments() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().any(|l| l == "rpa_compare"));
}

#[test]
fn config_errors_exit_with_one() {
    let d = scratch("bad");
    let cfg = d.join("bad.json");
    fs::write(&cfg, r#"{"k_fermi": 10, "experiments": ["no_such_experiment"]}"#).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("experiments"));
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn run_writes_csv_and_manifest() {
    let d = scratch("run");
    let cfg = d.join("run.json");
    fs::write(
        &cfg,
        r#"{"k_fermi": 6, "experiments": ["gauss_count", "slice_count_bound"],
            "params": {"gauss_k_fermi": [5, 10], "slice_k_fermi": [6]}}"#,
    )
    .unwrap();
    let out_dir = d.join("out");
    let out = bin()
        .args(["run", "--workers", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("gauss_count.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let names: Vec<&str> = manifest["experiments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, vec!["gauss_count", "slice_count_bound"]);
    assert_eq!(manifest["experiments"][0]["sha256"].as_str().unwrap().len(), 64);
    fs::remove_dir_all(d).unwrap();
}

#[test]
fn experiment_failure_exits_with_two() {
    let d = scratch("fail");
    let cfg = d.join("fail.json");
    // Far too strong an interaction for the stability hypothesis.
    fs::write(
        &cfg,
        r#"{"k_fermi": 5, "potential": [{"k": [0, 0, 1], "value": 1e6}, {"k": [0, 0, -1], "value": 1e6}],
            "experiments": ["hf_stability", "gauss_count"], "params": {"hf_kf_sq": 30.5, "gauss_k_fermi": [5]}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(d.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiments"][0]["status"], "failed");
    assert_eq!(manifest["experiments"][1]["status"], "ok");
    fs::remove_dir_all(d).unwrap();
}
