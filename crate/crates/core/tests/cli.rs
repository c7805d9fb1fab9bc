use std::path::{Path, PathBuf};
use std::process::Command;

use islm_core::io::{RunManifest, Table};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn islm(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_islm")).args(args).output().unwrap().status.code().unwrap()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn shipped_configs_match_the_defaults() {
    use islm_core::ModelConfig;
    let k = ModelConfig::from_json(&std::fs::read_to_string(config("default_kaldor.json")).unwrap()).unwrap();
    let t = ModelConfig::from_json(&std::fs::read_to_string(config("default_three_phase.json")).unwrap()).unwrap();
    assert_eq!(k, ModelConfig::default_kaldor());
    assert_eq!(t, ModelConfig::default_three_phase());
}

#[test]
fn verify_passes_on_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["default_kaldor.json", "default_three_phase.json"] {
        let out = tmp.path().join(name);
        let code = islm(&["verify", "--config", config(name).to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        assert_eq!(rep["violations"].as_array().unwrap().len(), 0);
        let m = manifest(&out);
        assert_eq!(m.status, "ok");
        assert_eq!(m.outputs, vec![out.join("report.json")]);
        assert_eq!(m.config_sha256.as_ref().unwrap().len(), 64);
    }
}

#[test]
fn malformed_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"alpha\": 1.0,\n  oops\n}").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(islm(&["verify", "--config", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]), 3);
    let m = manifest(&out);
    assert_eq!(m.error_kind.as_deref(), Some("Parse"));
    assert!(m.message.unwrap().contains("line 3"));
}

#[test]
fn bad_arguments_exit_three() {
    assert_eq!(islm(&["frobnicate"]), 3);
    assert_eq!(islm(&["verify"]), 3);
    assert_eq!(islm(&["--help"]), 0);
}

#[test]
fn violated_condition_exits_one_with_its_id() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = islm_core::ModelConfig::default_kaldor();
    cfg.invest.a = 0.0;
    let path = tmp.path().join("flat.json");
    std::fs::write(&path, cfg.to_json_pretty()).unwrap();
    let out = tmp.path().join("out");
    assert_eq!(islm(&["verify", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]), 1);
    let m = manifest(&out);
    assert_eq!(m.error_kind.as_deref(), Some("ConditionBroken"));
    assert!(m.message.unwrap().contains("16:kaldor"));
}

#[test]
fn captured_cycle_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // the shipped Kaldor default has its equilibrium on the lower stable arc
    assert_eq!(islm(&["cycle", "--config", config("default_kaldor.json").to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(manifest(&out).error_kind.as_deref(), Some("NoCycle"));
}

#[test]
fn sweep_csv_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let code = islm(&[
        "sweep", "--config", config("default_kaldor.json").to_str().unwrap(), "--out", out.to_str().unwrap(),
        "--parameter", "monetary-ms", "--from", "1.7", "--to", "1.95", "--steps", "26",
    ]);
    assert_eq!(code, 0);
    let t = Table::parse(&std::fs::read_to_string(out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(t.header, ["parameter_value", "eq_index", "y", "r", "kind"]);
    let kinds: Vec<&str> = t.rows.iter().map(|r| r[4].as_str()).collect();
    assert!(kinds.contains(&"Saddle"));
    let folds: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("folds.json")).unwrap()).unwrap();
    assert_eq!(folds["folds"].as_array().unwrap().len(), 2);
}

#[test]
fn cycle_svg_separates_stable_and_unstable_arcs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let code = islm(&["cycle", "--config", config("default_kaldor.json").to_str().unwrap(), "--out", out.to_str().unwrap(), "--place", "a2"]);
    assert_eq!(code, 0);
    let svg = std::fs::read_to_string(out.join("cycle.svg")).unwrap();
    assert!(svg.contains("class=\"arc-stable is\""));
    assert!(svg.contains("class=\"arc-unstable is\""));
    assert!(svg.contains("class=\"arrow\""));
    let t = Table::parse(&std::fs::read_to_string(out.join("cycle.csv")).unwrap()).unwrap();
    assert_eq!(t.header, ["t", "y", "r", "jump"]);
    let m = manifest(&out);
    assert!(m.outputs.iter().all(|p| p.exists()));
}

#[test]
fn hysteresis_json_reports_both_jumps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let code = islm(&["hysteresis", "--config", config("default_three_phase.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("hysteresis.json")).unwrap()).unwrap();
    let up = v["up_jump"]["value"].as_f64().unwrap();
    let down = v["down_jump"]["value"].as_f64().unwrap();
    assert!(up > down);
    assert!(out.join("hysteresis.svg").exists());
}
