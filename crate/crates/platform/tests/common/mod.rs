#![allow(dead_code)]

use std::path::{Path, PathBuf};

use careflow::cli::dispatch;
use careflow_core::census::ArrivalModel;
use careflow_core::defaults;
use careflow_core::sim::SimulationConfig;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Default config cut down to a few short replications.
pub fn small_config(seed: u64) -> SimulationConfig {
    let mut c = defaults::default_config();
    c.horizon_days = 60;
    c.warmup_days = 10;
    c.replications = 3;
    c.master_seed = seed;
    c
}

/// Nobody ever arrives, so demand is zero on every day.
pub fn empty_config() -> SimulationConfig {
    let mut c = small_config(1);
    c.arrival = ArrivalModel::Poisson { lambda: 0.0 };
    c
}

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("careflow").chain(args.iter().copied());
    let code = dispatch(argv, &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

pub fn write_config(dir: &Path, cfg: &SimulationConfig) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

/// The run id from a `run <id> <status>` line.
pub fn run_id(stdout: &str) -> String {
    stdout.lines().find_map(|l| l.strip_prefix("run ")).and_then(|l| l.split_whitespace().next()).expect("run line").to_string()
}
