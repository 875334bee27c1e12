mod common;

use careflow::service;
use careflow::store::{RunStatus, RunStore, DATA_DIR_ENV};
use careflow::Error;
use careflow_core::sim::{run, write_daily_csv};
use careflow_core::staffing::{compare, CostModel};
use common::*;

fn store() -> (tempfile::TempDir, RunStore) {
    let dir = tempfile::tempdir().unwrap();
    let s = RunStore::open(dir.path()).unwrap();
    (dir, s)
}

#[test]
fn reload_reproduces_the_report_bit_for_bit() {
    let (_d, store) = store();
    let cfg = small_config(3);
    let record = service::simulate(&store, cfg.clone()).unwrap();
    assert_eq!(record.status, RunStatus::Done);
    let fresh = run(&cfg).unwrap();
    let reloaded = store.load_output(record.run_id).unwrap();
    let strategies = service::default_strategies();
    let cost = CostModel::default();
    let a = compare(&fresh, &strategies, &cost).unwrap();
    let b = compare(&reloaded, &strategies, &cost).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.config_hash, cfg.hash());
}

#[test]
fn persisted_daily_csv_is_rederivable_from_config() {
    let (_d, store) = store();
    let record = service::simulate(&store, small_config(4)).unwrap();
    let stored = std::fs::read(store.artifact_path(record.run_id, "daily.csv")).unwrap();
    let cfg: careflow_core::sim::SimulationConfig =
        serde_json::from_slice(&std::fs::read(store.artifact_path(record.run_id, "config.json")).unwrap()).unwrap();
    let mut again = Vec::new();
    write_daily_csv(&run(&cfg).unwrap(), &mut again).unwrap();
    assert_eq!(stored, again);
}

#[test]
fn tampered_artifact_fails_verification() {
    let (_d, store) = store();
    let record = service::simulate(&store, small_config(5)).unwrap();
    store.verify(record.run_id).unwrap();
    let path = store.artifact_path(record.run_id, "daily.csv");
    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'0' { b'1' } else { b'0' };
    std::fs::write(&path, bytes).unwrap();
    match store.load_output(record.run_id).unwrap_err() {
        Error::Integrity { artifact, .. } => assert_eq!(artifact, "daily.csv"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn tampered_config_fails_verification() {
    let (_d, store) = store();
    let record = service::simulate(&store, small_config(5)).unwrap();
    let path = store.artifact_path(record.run_id, "config.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"replications\": 3", "\"replications\": 4");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(store.verify(record.run_id), Err(Error::Integrity { .. })));
}

#[test]
fn different_seeds_give_distinct_runs_and_artifacts() {
    let (_d, store) = store();
    let a = service::simulate(&store, small_config(10)).unwrap();
    let b = service::simulate(&store, small_config(11)).unwrap();
    assert_ne!(a.run_id, b.run_id);
    assert_ne!(a.config_hash, b.config_hash);
    let read = |id| std::fs::read(store.artifact_path(id, "daily.csv")).unwrap();
    assert_ne!(read(a.run_id), read(b.run_id));
    assert_eq!(store.list().unwrap().len(), 2);
}

#[test]
fn done_runs_have_artifacts_and_index_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let store = RunStore::open(dir.path()).unwrap();
        service::simulate(&store, small_config(6)).unwrap().run_id
    };
    let store = RunStore::open(dir.path()).unwrap();
    let r = store.get(id).unwrap();
    assert_eq!(r.status, RunStatus::Done);
    let art = r.artifacts.unwrap();
    for f in ["config.json", "daily.csv", "residents.csv", "manifest.json"] {
        assert!(art.join(f).is_file(), "{f}");
    }
    assert!(std::fs::read_dir(dir.path().join("tmp")).unwrap().next().is_none());
}

#[test]
fn persisting_twice_is_a_conflict() {
    let (_d, store) = store();
    let cfg = small_config(7);
    let record = service::simulate(&store, cfg.clone()).unwrap();
    let out = run(&cfg).unwrap();
    assert!(matches!(store.persist(&record, &out), Err(Error::Conflict(_))));
}

#[test]
fn unknown_run_is_not_found() {
    let (_d, store) = store();
    assert!(matches!(store.get(uuid::Uuid::new_v4()), Err(Error::NotFound(_))));
    assert!(matches!(store.get_str("not-a-uuid"), Err(Error::NotFound(_))));
}

#[test]
fn pending_run_output_is_a_conflict() {
    let (_d, store) = store();
    let r = store.create_run(small_config(8)).unwrap();
    assert!(matches!(service::finished_output(&store, r.run_id), Err(Error::Conflict(_))));
}

#[test]
fn concurrent_creates_keep_every_record() {
    let (_d, store) = store();
    std::thread::scope(|s| {
        for i in 0..8 {
            let store = &store;
            s.spawn(move || store.create_run(small_config(i)).unwrap());
        }
    });
    let mut ids: Vec<_> = store.list().unwrap().into_iter().map(|r| r.run_id).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 8);
}

#[test]
fn scenarios_save_and_shadowing_presets_is_refused() {
    let (_d, store) = store();
    let s = careflow_core::defaults::scenario("S1").unwrap();
    let mut mine = s.clone();
    mine.name = "light_adl".into();
    store.save_scenario(&mine).unwrap();
    assert_eq!(store.scenario("light_adl").unwrap(), mine);
    assert_eq!(store.saved_scenarios().unwrap(), vec![mine]);
    let mut shadow = s;
    shadow.name = "s2".into();
    assert!(matches!(store.save_scenario(&shadow), Err(Error::Conflict(_))));
    assert!(store.scenario("../etc").is_err());
}

#[test]
fn data_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var(DATA_DIR_ENV, dir.path());
    let store = RunStore::from_env().unwrap();
    std::env::remove_var(DATA_DIR_ENV);
    assert_eq!(store.root(), dir.path());
    assert!(dir.path().join("runs").is_dir());
}
