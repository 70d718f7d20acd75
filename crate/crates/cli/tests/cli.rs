//! End-to-end runs of the `opatwin` binary.

use std::path::Path;
use std::process::{Command, Output};

use opatwin_cli::ScenarioConfig;

fn opatwin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opatwin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}_summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn shipped_default_config_matches_builtin() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config/default.json");
    let loaded = ScenarioConfig::load(&path).unwrap();
    assert_eq!(loaded.hash(), ScenarioConfig::default().hash());
}

#[test]
fn reruns_are_byte_identical() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let out = opatwin(&["--quiet", "--scale", "0.1", "--out", d.path().to_str().unwrap(), "sweep-phase"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let a = std::fs::read(dirs[0].path().join(&name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
}

#[test]
fn csv_carries_provenance_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = opatwin(&["--quiet", "--scale", "0.1", "--seed", "7", "--out", dir.path().to_str().unwrap(), "sweep-phase"]);
    assert!(out.status.success());
    let csv = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "csv"))
        .unwrap();
    let text = std::fs::read_to_string(csv).unwrap();
    for key in ["# tool: ", "# version: ", "# config_sha256: ", "# seed: 7"] {
        assert!(text.contains(key), "missing {key:?}");
    }
}

#[test]
fn invalid_config_exits_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&ScenarioConfig::default().to_json()).unwrap();
    value["zero_span"]["points"][1]["center"] = serde_json::json!(-70.0);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, value.to_string()).unwrap();
    let out = opatwin(&["--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "zero-span"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("zero_span.points[1]") && stderr.contains("-70"), "{stderr}");
}

#[test]
fn pump_off_sweep_sits_at_the_shot_noise_level() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ScenarioConfig::default();
    config.opa.pump_power = 0.0;
    let path = dir.path().join("pump_off.json");
    std::fs::write(&path, config.to_json()).unwrap();
    let out = opatwin(&["--quiet", "--scale", "0.2", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "sweep-phase"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "sweep-phase");
    let sq = s["summary"]["squeezing_db"].as_f64().unwrap();
    let anti = s["summary"]["anti_squeezing_db"].as_f64().unwrap();
    assert!(sq.abs() < 0.2 && anti.abs() < 0.2, "{sq} {anti}");
}

#[test]
fn fit_reports_jitter_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.csv");
    std::fs::write(
        &input,
        "role,label,squeezing_db,anti_squeezing_db,frequency_hz\n\
         ideal,vacuum,-5.70,13.68,5000\n\
         observed,broadband,-5.57,13.80,5000\n",
    )
    .unwrap();
    let out = opatwin(&["--quiet", "--out", dir.path().to_str().unwrap(), "fit", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "fit");
    let rms = s["summary"]["results"][1]["phase_jitter"]["rms_rad"].as_f64().unwrap();
    assert!((rms - 0.018).abs() < 1.5e-3, "{rms}");
}

#[test]
fn tightened_tolerances_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.json");
    std::fs::write(&tol, r#"{"jitter_forward_tolerance_db": 1e-9}"#).unwrap();
    let out = opatwin(&["validate", "--only", "2", "--tolerances", tol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("[FAIL]  2"), "{stdout}");
}

#[test]
fn spectrum_survives_sparse_averaging() {
    let dir = tempfile::tempdir().unwrap();
    let out = opatwin(&["--quiet", "--scale", "0.25", "--out", dir.path().to_str().unwrap(), "spectrum"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = &summary(dir.path(), "spectrum")["summary"];
    let sq = s["squeezing_db"].as_f64().unwrap();
    let anti = s["anti_squeezing_db"].as_f64().unwrap();
    assert!((sq + 5.6).abs() < 0.5 && (anti - 13.7).abs() < 0.5, "{sq} {anti}");
}
