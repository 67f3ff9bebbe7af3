use std::process::Command;

const BINARY: &str = env!("CARGO_BIN_EXE_cordes-lab");

fn json(path: &std::path::Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn out_of_window_sigma_exits_with_hypothesis_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(BINARY)
        .args(["linear", "--N", "4", "--gamma", "1", "--sigma", "0.6", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let err = json(&out.join("error.json"));
    assert_eq!(err["error"], "hypothesis_violation");
    assert_eq!(err["kind"], "window");
}

#[test]
fn flags_override_config_file_and_manifest_records_the_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "N = 4\ngamma = 1.0\nkmax = 3\n").unwrap();
    let out = dir.path().join("run");
    let status = Command::new(BINARY)
        .args(["exponents", "--gamma", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["gamma"], 3.0);
    assert_eq!(manifest["config"]["N"], 4);
    let summary = json(&out.join("summary.json"));
    assert!(summary["p_crit"].is_null());
    assert_eq!(summary["indicial_roots"].as_array().unwrap().len(), 4);
}

#[test]
fn radial_matches_stored_classical_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = Command::new(BINARY)
        .args(["radial", "--N", "3", "--gamma", "0", "--p", "3", "--baseline", "classical", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let summary = json(&out.join("summary.json"));
    assert!(summary["baseline"]["max_abs_diff"].as_f64().unwrap() <= 1e-6);
    let csv = std::fs::read_to_string(out.join("modes/0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("r,w,w_prime,w_double_prime"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"N": 4, "gama": 1.0}"#).unwrap();
    let status = Command::new(BINARY)
        .args(["exponents", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}
