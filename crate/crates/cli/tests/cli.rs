//! End-to-end tests of the `mhl` binary: determinism of the written
//! artifacts, seed precedence, and error handling for bad configs.

use std::fs;
use std::path::Path;
use std::process::Command;

fn mhl() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mhl"));
    // Keep the ambient environment from leaking a seed into the tests.
    c.env_remove("MHL_SEED");
    c
}

fn small_config() -> serde_json::Value {
    serde_json::json!({
        "seed": 11,
        "phi": {"kind": "power", "p": 0.8},
        "ensemble": {"depths": [3, 4], "trials_per_depth": 3},
        "experiments": [
            {"experiment": "norms"},
            {"experiment": "decompose", "kind": "conditional_square"},
            {"experiment": "equivalence", "kind": "predictable_maximal"},
            {"experiment": "convergence", "depth": 6, "p": 1.0,
             "tail_thresholds": [1.0, 4.0], "caps": [0.5],
             "normalization_trials": 5}
        ]
    })
}

fn write_config(dir: &Path, value: &serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

#[test]
fn run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    for out in ["a", "b"] {
        let status = mhl()
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success(), "run {out} failed");
    }
    let report_a = fs::read(dir.path().join("a/report.json")).unwrap();
    let report_b = fs::read(dir.path().join("b/report.json")).unwrap();
    assert_eq!(report_a, report_b, "report.json must be byte-identical");
    let csv_a = fs::read(dir.path().join("a/trials.csv")).unwrap();
    let csv_b = fs::read(dir.path().join("b/trials.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "trials.csv must be byte-identical");

    let report: serde_json::Value =
        serde_json::from_slice(&report_a).expect("report is valid JSON");
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["seed"], 11);
    assert_eq!(report["seed_source"], "config");
    assert_eq!(report["pass"], true);
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut config_value = small_config();
    // Trim to the cheapest experiment; only the header matters here.
    config_value["experiments"] = serde_json::json!([{"experiment": "norms"}]);
    config_value["ensemble"] = serde_json::json!({"depths": [3], "trials_per_depth": 1});
    let config = write_config(dir.path(), &config_value);

    let run = |out: &str, seed_flag: Option<&str>, env: Option<&str>| {
        let mut cmd = mhl();
        cmd.args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.path().join(out));
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("MHL_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        let report: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(out).join("report.json")).unwrap())
                .unwrap();
        (report["seed"].clone(), report["seed_source"].clone())
    };

    assert_eq!(run("flag", Some("5"), Some("9")), (5.into(), "flag".into()));
    assert_eq!(run("env", None, Some("9")), (9.into(), "env".into()));
    assert_eq!(run("config", None, None), (11.into(), "config".into()));
}

#[test]
fn invalid_env_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let output = mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("MHL_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("MHL_SEED"), "stderr: {stderr}");
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = small_config();
    value["no_such_option"] = serde_json::json!(1);
    let config = write_config(dir.path(), &value);
    let output = mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn invalid_phi_parameter_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = small_config();
    value["phi"] = serde_json::json!({"kind": "power", "p": -1.0});
    let config = write_config(dir.path(), &value);
    let output = mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(
        !dir.path().join("out/report.json").exists(),
        "no report on config errors"
    );
}

#[test]
fn schema_output_is_a_runnable_config() {
    let dir = tempfile::tempdir().unwrap();
    let output = mhl().arg("schema").output().unwrap();
    assert!(output.status.success());
    // The printed example must itself parse and run.
    let config_path = dir.path().join("schema.json");
    fs::write(&config_path, &output.stdout).unwrap();
    let status = mhl()
        .args(["run", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert!(status.success(), "schema example must run cleanly");
    assert!(dir.path().join("out/trials.csv").exists());
}

#[test]
fn describe_works_with_and_without_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let with = mhl()
        .args(["describe", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(with.status.success());
    let text = String::from_utf8_lossy(&with.stdout);
    assert!(text.contains("t^0.8"), "describe names the phi: {text}");
    assert!(text.contains("equivalence_P"));

    let without = mhl().arg("describe").output().unwrap();
    assert!(without.status.success());
    let text = String::from_utf8_lossy(&without.stdout);
    assert!(text.contains("seed precedence"));
}

#[test]
fn sub_one_aq_gate_exits_two_with_schema_message() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = small_config();
    value["aq_gates"] = serde_json::json!([0.5]);
    value["experiments"] = serde_json::json!([{"experiment": "inequalities"}]);
    let config = write_config(dir.path(), &value);
    let output = mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("aq_gates"), "stderr names the field: {stderr}");
    assert!(
        !dir.path().join("out/report.json").exists(),
        "no report on config errors"
    );
}

#[test]
fn describe_empty_experiment_list_exits_zero_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = small_config();
    value["experiments"] = serde_json::json!([]);
    let config = write_config(dir.path(), &value);
    let output = mhl()
        .args(["describe", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "describe never fails on an empty list");
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(text.contains("nothing to run"), "{text}");

    // Running the same config is an error: there is no report to write.
    let run = mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn csv_is_rfc4180_with_stable_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    assert!(mhl()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(dir.path().join("out/trials.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,kind,depth,trial,metric,value"
    );
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.len() == 6), "constant column count");
}
