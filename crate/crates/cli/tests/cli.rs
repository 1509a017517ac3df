use std::path::Path;
use std::process::{Command, Output};

fn son_flha(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_son-flha"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, "sim_duration_steps = 60\nq_epochs = 5\nq_episode_steps = 30\n").unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = son_flha(&["--config", "nowhere/scenario.toml", "collect"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere/scenario.toml"), "{}", stderr(&out));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "ue_cnt = 3\n").unwrap();
    let out = son_flha(&["--config", path.to_str().unwrap(), "collect"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ue_cnt"), "{}", stderr(&out));
}

#[test]
fn unknown_mechanism_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = son_flha(&["run", "--mechanism", "a4"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_step_collection_reports_insufficient_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = son_flha(&["collect", "--steps", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("history"), "{}", stderr(&out));
    assert!(!dir.path().join("out/history.csv").exists());
}

#[test]
fn train_without_history_names_the_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = son_flha(&["--out", "art", "train"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("history.csv"), "{}", stderr(&out));
}

#[test]
fn a3_run_needs_no_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = son_flha(
        &["--config", &config, "--out", "a3", "run", "--mechanism", "a3"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["events.csv", "links.csv", "kpi_summary.csv", "kpi_series.csv"] {
        assert!(dir.path().join("a3").join(name).exists(), "{name}");
    }
    let events = std::fs::read_to_string(dir.path().join("a3/events.csv")).unwrap();
    assert_eq!(
        events.lines().next(),
        Some("step,ue,source,target,outcome,failure_kind,pingpong")
    );
}

#[test]
fn flha_run_without_artifacts_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = son_flha(&["run", "--mechanism", "flha-son", "--artifacts", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty/"), "{}", stderr(&out));
}

#[test]
fn collect_train_run_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let ok = |args: &[&str]| {
        let mut full = vec!["--config", config.as_str()];
        full.extend_from_slice(args);
        let out = son_flha(&full, dir.path());
        assert!(out.status.success(), "{args:?}: {}", stderr(&out));
    };
    ok(&["--out", "art", "collect", "--steps", "200"]);
    ok(&["--out", "art", "train"]);
    for dir_name in [
        "art/rules.txt",
        "art/flha-q/rules.txt",
        "art/expert/rules.txt",
        "art/mfs/ho_factor.txt",
    ] {
        assert!(dir.path().join(dir_name).exists(), "{dir_name}");
    }
    ok(&["--out", "son", "run", "--mechanism", "flha-son", "--artifacts", "art"]);
    ok(&[
        "--out",
        "cmp",
        "compare",
        "--speeds",
        "30",
        "--seeds",
        "1",
        "--mechanisms",
        "a3,flha-son",
        "--artifacts",
        "art",
    ]);
    let summary = std::fs::read_to_string(dir.path().join("cmp/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
