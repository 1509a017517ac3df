use std::fs;

use son_flha::handover::MechanismKind;
use son_flha::pipeline::{self, ArtifactError};
use son_flha::{sim, Error, ScenarioConfig};

fn small_config() -> ScenarioConfig {
    ScenarioConfig {
        sim_duration_steps: 150,
        q_epochs: 20,
        q_episode_steps: 50,
        ..ScenarioConfig::default()
    }
}

#[test]
fn artifacts_round_trip_and_drive_every_mechanism() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let history = sim::collect_history(&config, 600, 5).unwrap();
    pipeline::train_all(&config, &history, 5, dir.path()).unwrap();

    let son = pipeline::read_flha(dir.path()).unwrap();
    assert!(son.qtable.is_none());
    assert!(dir.path().join(pipeline::QTABLE_FILE).exists());
    assert!(!dir.path().join("expert").join(pipeline::QTABLE_FILE).exists());

    let rewritten = tempfile::tempdir().unwrap();
    pipeline::write_flha(rewritten.path(), &son).unwrap();
    for name in [
        pipeline::RULES_FILE,
        pipeline::THRESHOLD_FILE,
        "mfs/rsrp.txt",
        "mfs/ho_factor.txt",
    ] {
        assert_eq!(
            fs::read_to_string(dir.path().join(name)).unwrap(),
            fs::read_to_string(rewritten.path().join(name)).unwrap(),
            "{name}"
        );
    }

    for kind in MechanismKind::ALL {
        let mech = pipeline::load_mechanism(kind, &config, dir.path()).unwrap();
        assert_eq!(mech.kind(), kind);
        let run = sim::run_for_steps(&config, &mech, 9, 40).unwrap();
        assert_eq!(run.links.len(), 40 * config.ue_count);
        assert!(run.events.len() <= 40 * config.ue_count);
    }
}

#[test]
fn learned_rules_cover_the_q_table() {
    let config = small_config();
    let history = sim::collect_history(&config, 600, 5).unwrap();
    let son = pipeline::train_son(&config, &history, 5).unwrap();
    let table = son.qtable.as_ref().unwrap();
    assert_eq!(son.rules.len(), table.len());
    assert!((0.0..=1.0).contains(&son.threshold));
    let again = pipeline::train_son(&config, &history, 5).unwrap();
    assert_eq!(again.qtable.as_ref(), Some(table));
}

#[test]
fn a3_needs_no_artifacts() {
    let config = small_config();
    let mech = pipeline::load_mechanism(MechanismKind::A3, &config, "/nonexistent".as_ref()).unwrap();
    assert_eq!(mech.kind(), MechanismKind::A3);
}

#[test]
fn missing_rules_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let err = pipeline::load_mechanism(MechanismKind::FlhaSon, &small_config(), dir.path()).unwrap_err();
    match err {
        Error::Artifact(ArtifactError::Missing(path)) => assert!(path.starts_with(dir.path())),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn comparison_tables_are_written() {
    let config = small_config();
    let dir = tempfile::tempdir().unwrap();
    let cells = pipeline::compare_runs(&config, &[30.0, 120.0], &[MechanismKind::A3], &[1, 2], dir.path()).unwrap();
    assert_eq!(cells.len(), 4);
    assert_eq!((cells[0].speed_kmh, cells[0].seed), (30.0, 1));
    assert_eq!((cells[3].speed_kmh, cells[3].seed), (120.0, 2));
    pipeline::write_comparison(dir.path(), &cells).unwrap();
    assert!(dir.path().join("summary.csv").exists());
    for name in pipeline::TABLE_FILES {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}
