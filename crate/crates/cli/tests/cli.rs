use std::path::Path;
use std::process::{Command, Output};

fn regionvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regionvar"))
        .args(args)
        .output()
        .expect("spawn regionvar")
}

fn ok(args: &[&str]) -> Output {
    let out = regionvar(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn generated(dir: &Path) -> (String, String) {
    let d = dir.to_str().unwrap();
    ok(&["generate", "--out-dir", d, "--rows", "900", "--agents", "8", "--seed", "1"]);
    (format!("{d}/data.csv"), format!("{d}/truth.json"))
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

#[test]
fn beta_one_renders_whole_space() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generated(dir.path());
    let out = ok(&["discover", "--data", &data, "--beta", "1"]);
    let report = json(&out);
    assert_eq!(report["result"]["termination"], "converged");
    assert!(report["rendering"].as_str().unwrap().contains("everything"));
}

#[test]
fn excluded_feature_is_never_rendered() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generated(dir.path());
    let out = ok(&["discover", "--data", &data, "--exclude-features", "drug_possession", "--region", "tree:leaf=10"]);
    let rendering = json(&out)["rendering"].as_str().unwrap().to_string();
    assert!(!rendering.contains("drug_possession"));
    assert!(!String::from_utf8_lossy(&out.stderr).contains("drug_possession"));
}

#[test]
fn tune_beta_writes_one_curve_row_per_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generated(dir.path());
    let curve = dir.path().join("curve.csv");
    ok(&[
        "tune-beta",
        "--data",
        &data,
        "--region",
        "ridge",
        "--permutations",
        "4",
        "--curve-out",
        curve.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(curve).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "beta,p_value,q_obs,null_mean,null_q05,null_q50,null_q95");
    assert_eq!(lines.len(), 12);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generated(dir.path());
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("data = \"{data}\"\nbeta = 0.3\nregion = ridge\n")).unwrap();
    let report = json(&ok(&["discover", "--config", cfg.to_str().unwrap(), "--beta", "0.25"]));
    assert_eq!(report["config"]["beta"], 0.25);
    assert_eq!(report["config"]["region"]["region"]["kind"], "ridge");
}

#[test]
fn evaluate_accepts_region_files_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = generated(dir.path());
    let region = dir.path().join("region.json");
    ok(&["discover", "--data", &data, "--region-out", region.to_str().unwrap()]);
    let report = json(&ok(&["evaluate", "--data", &data, "--truth", &truth, "--region-file", region.to_str().unwrap()]));
    let auc = report["evaluation"]["region_auc"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));

    let truth_doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    let bits = truth_doc["region"].as_str().unwrap();
    let mut scores = String::from("row_id,score\n");
    for (i, b) in bits.chars().enumerate() {
        scores.push_str(&format!("{i},{b}\n"));
    }
    let path = dir.path().join("scores.csv");
    std::fs::write(&path, scores).unwrap();
    let report = json(&ok(&[
        "evaluate",
        "--data",
        &data,
        "--truth",
        &truth,
        "--scores",
        path.to_str().unwrap(),
        "--cutoff",
        "0.5",
    ]));
    assert_eq!(report["evaluation"]["region_auc"], 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = generated(dir.path());
    assert_eq!(regionvar(&["discover", "--data", "/nonexistent.csv"]).status.code(), Some(3));
    assert_eq!(regionvar(&["discover", "--data", &data, "--region", "svm"]).status.code(), Some(2));
    assert_eq!(regionvar(&["discover", "--data", &data, "--agent-col", "nope"]).status.code(), Some(2));
    assert_eq!(
        regionvar(&["validate", "--data", &data, "--eta-r", "10"]).status.code(),
        Some(2)
    );
    assert_eq!(
        regionvar(&["discover", "--data", &data, "--out", "/nonexistent/dir/out.json"]).status.code(),
        Some(3)
    );
}
