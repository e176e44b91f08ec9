use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use hoptomo::formats::{MatrixFile, ReconstructionFile};

fn hoptomo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoptomo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn hoptomo")
}

fn hoptomo_stdin(dir: &Path, args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_hoptomo"))
        .current_dir(dir)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn hoptomo");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line");
    serde_json::from_str(line).expect("error json")
}

#[test]
fn ideal_writes_a_valid_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = hoptomo(
        dir.path(),
        &["ideal", "--preset", "switch-y-", "--out", "w.json"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("w.json")).unwrap();
    let w = serde_json::from_str::<MatrixFile>(&text)
        .unwrap()
        .process()
        .unwrap();
    assert_eq!(w.matrix.rows(), 64);
    w.validate().unwrap();
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("w.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "ideal");
    assert!(manifest["config_hash"]
        .as_str()
        .is_some_and(|h| h.len() == 64));
}

#[test]
fn settings_lists_every_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = hoptomo(
        dir.path(),
        &["settings", "--family", "restricted", "--emit", "csv"],
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 9216 + 1);
    let again = hoptomo(dir.path(), &["settings", "--family", "restricted"]);
    assert_eq!(text.as_bytes(), &again.stdout[..]);
}

#[test]
fn simulate_then_reconstruct_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let sim = hoptomo(dir.path(), &["simulate", "--shots", "1600", "--seed", "7"]);
    assert!(
        sim.status.success(),
        "{}",
        String::from_utf8_lossy(&sim.stderr)
    );
    let repeat = hoptomo(dir.path(), &["simulate", "--shots", "1600", "--seed", "7"]);
    assert_eq!(sim.stdout, repeat.stdout);

    let rec = hoptomo_stdin(
        dir.path(),
        &["reconstruct", "--impose-future-x", "--out", "rec.json"],
        &sim.stdout,
    );
    assert!(
        rec.status.success(),
        "{}",
        String::from_utf8_lossy(&rec.stderr)
    );
    let file: ReconstructionFile =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rec.json")).unwrap())
            .unwrap();
    assert_eq!(file.family, "restricted");
    assert!(file.fidelity_to_source.unwrap() >= 0.98);
    assert!(dir.path().join(&file.matrix_ref).exists());
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("rec.json.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([7]));
}

#[test]
fn family_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = hoptomo(dir.path(), &["simulate", "--family", "restricted"]);
    assert!(sim.status.success());
    let rec = hoptomo_stdin(
        dir.path(),
        &["reconstruct", "--family", "full"],
        &sim.stdout,
    );
    assert_eq!(rec.status.code(), Some(1));
    assert!(error_json(&rec)["message"]
        .as_str()
        .unwrap()
        .contains("full"));
}

#[test]
fn bad_arguments_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["ideal", "--preset", "nope"][..],
        &["simulate", "--shots", "many"],
        &["frobnicate"],
        &["game", "--shots", "10"],
        &["witness", "--noise", "pink"],
        &[
            "worst-case",
            "--eps-grid",
            "0.1:0.0:0.01",
            "--witness",
            "g.json",
        ],
    ] {
        let out = hoptomo(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = error_json(&out);
        assert!(err["message"].is_string(), "{args:?}");
        assert_eq!(err["exit_code"], 1);
    }
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"preset": "switch-y-", "colour": "red"}"#,
    )
    .unwrap();
    let out = hoptomo(dir.path(), &["ideal", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(error_json(&out)["message"]
        .as_str()
        .unwrap()
        .contains("colour"));

    std::fs::write(
        dir.path().join("good.json"),
        r#"{"preset": "comb-ab", "out": "c.json"}"#,
    )
    .unwrap();
    let out = hoptomo(dir.path(), &["ideal", "--config", "good.json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("c.json").exists());
}

#[test]
fn game_reports_ten_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let out = hoptomo(dir.path(), &["game"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 10);
    assert!((v["p_succ"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
