//! Directory-per-run artifact store with a JSON index.
//!
//! ```text
//! $CAREFLOW_DATA_DIR/
//!   index.json            RunRecord list
//!   runs/<run_id>/        config.json daily.csv residents.csv manifest.json
//!   scenarios/<name>.json saved census scenarios
//!   tmp/                  staging for atomic writes
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use careflow_core::census::CensusScenario;
use careflow_core::defaults;
use careflow_core::sim::{write_daily_csv, write_residents_csv, DailyRecord, SimulationConfig, SimulationOutput};
use careflow_core::survival::Disposition;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::error::{core_message, Error, Result};

pub const DATA_DIR_ENV: &str = "CAREFLOW_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "careflow-data";
pub const ARTIFACTS: [&str; 3] = ["config.json", "daily.csv", "residents.csv"];
pub const PRESETS: [&str; 4] = ["baseline", "S1", "S2", "S3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: Uuid,
    pub created_at: DateTime<Utc>,
    pub config_hash: String,
    pub config: SimulationConfig,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Output directory, set once the run is done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: Uuid,
    pub config_hash: String,
    pub master_seed: u64,
    pub horizon_days: u32,
    pub warmup_days: u32,
    pub replications: u32,
    pub dispositions: Vec<Disposition>,
    pub careflow_version: String,
    pub created_at: DateTime<Utc>,
    /// File name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RunStore {
    root: PathBuf,
    // serializes read-modify-write of index.json within the process
    index_lock: Mutex<()>,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["runs", "scenarios", "tmp"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        }
        Ok(RunStore { root, index_lock: Mutex::new(()) })
    }

    /// `$CAREFLOW_DATA_DIR`, else `./careflow-data`.
    pub fn from_env() -> Result<Self> {
        Self::open(std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_DATA_DIR), PathBuf::from))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, id: Uuid) -> PathBuf {
        self.root.join("runs").join(id.to_string())
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn read_index(&self) -> Result<Vec<RunRecord>> {
        match fs::read(self.index_path()) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| Error::Internal(format!("corrupt run index: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(Error::io("reading run index")(e)),
        }
    }

    fn write_index(&self, records: &[RunRecord]) -> Result<()> {
        let json = serde_json::to_vec_pretty(records).map_err(|e| Error::Internal(e.to_string()))?;
        write_atomic(&self.index_path(), &self.root.join("tmp"), &json)
    }

    fn modify<T>(&self, f: impl FnOnce(&mut Vec<RunRecord>) -> Result<T>) -> Result<T> {
        let _guard = self.index_lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut records = self.read_index()?;
        let out = f(&mut records)?;
        self.write_index(&records)?;
        Ok(out)
    }

    /// Registers a pending run.
    pub fn create_run(&self, config: SimulationConfig) -> Result<RunRecord> {
        let record = RunRecord {
            run_id: Uuid::new_v4(),
            created_at: Utc::now(),
            config_hash: config.hash(),
            config,
            status: RunStatus::Pending,
            error: None,
            artifacts: None,
        };
        self.modify(|rs| {
            rs.push(record.clone());
            Ok(())
        })?;
        Ok(record)
    }

    pub fn get(&self, id: Uuid) -> Result<RunRecord> {
        let _guard = self.index_lock.lock().unwrap_or_else(|p| p.into_inner());
        self.read_index()?.into_iter().find(|r| r.run_id == id).ok_or_else(|| Error::NotFound(id.to_string()))
    }

    /// Looks a run up by its id string.
    pub fn get_str(&self, id: &str) -> Result<RunRecord> {
        let id = Uuid::parse_str(id).map_err(|_| Error::NotFound(id.to_string()))?;
        self.get(id)
    }

    pub fn list(&self) -> Result<Vec<RunRecord>> {
        let _guard = self.index_lock.lock().unwrap_or_else(|p| p.into_inner());
        self.read_index()
    }

    pub fn set_status(&self, id: Uuid, status: RunStatus, error: Option<String>) -> Result<RunRecord> {
        self.modify(|rs| {
            let r = rs.iter_mut().find(|r| r.run_id == id).ok_or_else(|| Error::NotFound(id.to_string()))?;
            r.status = status;
            r.error = error;
            if status == RunStatus::Done {
                r.artifacts = Some(self.run_dir(id));
            }
            Ok(r.clone())
        })
    }

    /// Writes the artifacts into a staging directory and renames it into
    /// place, so a run directory is either complete or absent.
    pub fn persist(&self, record: &RunRecord, output: &SimulationOutput) -> Result<PathBuf> {
        let dest = self.run_dir(record.run_id);
        if dest.exists() {
            return Err(Error::Conflict(format!("run {} already has artifacts", record.run_id)));
        }
        let stage = self.root.join("tmp").join(format!("{}-{}", record.run_id, Uuid::new_v4()));
        fs::create_dir_all(&stage).map_err(Error::io("creating staging directory"))?;
        let result = (|| {
            let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
            files.push(("config.json", serde_json::to_vec_pretty(&record.config).map_err(|e| Error::Internal(e.to_string()))?));
            let mut daily = Vec::new();
            write_daily_csv(output, &mut daily)?;
            files.push(("daily.csv", daily));
            let mut residents = Vec::new();
            write_residents_csv(output, &mut residents)?;
            files.push(("residents.csv", residents));

            let mut hashes = BTreeMap::new();
            for (name, bytes) in &files {
                fs::write(stage.join(name), bytes).map_err(Error::io(format!("writing {name}")))?;
                hashes.insert((*name).to_string(), sha256_hex(bytes));
            }
            let manifest = Manifest {
                run_id: record.run_id,
                config_hash: record.config_hash.clone(),
                master_seed: output.master_seed,
                horizon_days: output.horizon_days,
                warmup_days: output.warmup_days,
                replications: output.replications.len() as u32,
                dispositions: output.dispositions.clone(),
                careflow_version: env!("CARGO_PKG_VERSION").to_string(),
                created_at: Utc::now(),
                artifacts: hashes,
            };
            let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
            fs::write(stage.join("manifest.json"), json).map_err(Error::io("writing manifest.json"))?;
            fs::rename(&stage, &dest).map_err(Error::io(format!("moving run into {}", dest.display())))
        })();
        if result.is_err() {
            let _ = fs::remove_dir_all(&stage);
        }
        result.map(|()| dest)
    }

    /// Checks every artifact and the config hash against the manifest.
    pub fn verify(&self, id: Uuid) -> Result<Manifest> {
        let dir = self.run_dir(id);
        let integrity = |artifact: &str, detail: String| Error::Integrity {
            run_id: id.to_string(),
            artifact: artifact.to_string(),
            detail,
        };
        let bytes = fs::read(dir.join("manifest.json")).map_err(|e| integrity("manifest.json", e.to_string()))?;
        let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| integrity("manifest.json", e.to_string()))?;
        for name in ARTIFACTS {
            let expected = manifest.artifacts.get(name).ok_or_else(|| integrity(name, "not listed in manifest".into()))?;
            let bytes = fs::read(dir.join(name)).map_err(|e| integrity(name, e.to_string()))?;
            let actual = sha256_hex(&bytes);
            if &actual != expected {
                return Err(integrity(name, format!("sha256 {actual} does not match manifest {expected}")));
            }
        }
        let cfg: SimulationConfig = serde_json::from_slice(&fs::read(dir.join("config.json")).map_err(|e| integrity("config.json", e.to_string()))?)
            .map_err(|e| integrity("config.json", e.to_string()))?;
        if cfg.hash() != manifest.config_hash {
            return Err(integrity("config.json", "config hash does not match manifest".into()));
        }
        Ok(manifest)
    }

    /// Rebuilds the daily traces of a finished run after verifying it.
    pub fn load_output(&self, id: Uuid) -> Result<SimulationOutput> {
        let manifest = self.verify(id)?;
        let file = fs::File::open(self.run_dir(id).join("daily.csv")).map_err(Error::io("opening daily.csv"))?;
        let traces = read_daily_csv(file, manifest.dispositions.len())
            .map_err(|e| Error::Integrity { run_id: id.to_string(), artifact: "daily.csv".into(), detail: e })?;
        let mut out = SimulationOutput::from_daily(manifest.dispositions, manifest.warmup_days, traces)?;
        out.config_hash = manifest.config_hash;
        out.master_seed = manifest.master_seed;
        Ok(out)
    }

    pub fn artifact_path(&self, id: Uuid, name: &str) -> PathBuf {
        self.run_dir(id).join(name)
    }

    pub fn save_scenario(&self, scenario: &CensusScenario) -> Result<PathBuf> {
        check_scenario_name(&scenario.name)?;
        if PRESETS.iter().any(|p| p.eq_ignore_ascii_case(&scenario.name)) {
            return Err(Error::Conflict(format!("`{}` is a built-in preset", scenario.name)));
        }
        scenario.validate().map_err(|e| Error::config("scenario", core_message(&e)))?;
        let path = self.root.join("scenarios").join(format!("{}.json", scenario.name));
        let json = serde_json::to_vec_pretty(scenario).map_err(|e| Error::Internal(e.to_string()))?;
        write_atomic(&path, &self.root.join("tmp"), &json)?;
        Ok(path)
    }

    /// Saved scenarios, sorted by name.
    pub fn saved_scenarios(&self) -> Result<Vec<CensusScenario>> {
        let dir = self.root.join("scenarios");
        let mut out = Vec::new();
        for entry in fs::read_dir(&dir).map_err(Error::io("listing scenarios"))? {
            let path = entry.map_err(Error::io("listing scenarios"))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let bytes = fs::read(&path).map_err(Error::io(format!("reading {}", path.display())))?;
                let s: CensusScenario = serde_json::from_slice(&bytes)
                    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                out.push(s);
            }
        }
        out.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(out)
    }

    /// A preset (case-insensitive) or a saved scenario.
    pub fn scenario(&self, name: &str) -> Result<CensusScenario> {
        if PRESETS.iter().any(|p| p.eq_ignore_ascii_case(name)) {
            return Ok(defaults::scenario(name)?);
        }
        check_scenario_name(name)?;
        let path = self.root.join("scenarios").join(format!("{name}.json"));
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::config("scenario", format!("unknown scenario `{name}`")))
            }
            Err(e) => Err(Error::io(format!("reading {}", path.display()))(e)),
        }
    }
}

fn check_scenario_name(name: &str) -> Result<()> {
    let ok = !name.is_empty() && name.len() <= 64 && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(Error::config("name", "scenario names use 1-64 letters, digits, `_` or `-`"))
    }
}

fn write_atomic(path: &Path, tmp_dir: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_dir.join(format!("{}.tmp", Uuid::new_v4()));
    fs::write(&tmp, bytes).map_err(Error::io(format!("writing {}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(Error::io(format!("replacing {}", path.display())))
}

/// Parses `daily.csv` back into per-replication traces.
pub fn read_daily_csv<R: std::io::Read>(reader: R, n_dispositions: usize) -> std::result::Result<Vec<Vec<DailyRecord>>, String> {
    let mut rdr = csv::Reader::from_reader(reader);
    let width = 7 + n_dispositions;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    if headers.len() != width {
        return Err(format!("expected {width} columns, found {}", headers.len()));
    }
    let mut traces: Vec<Vec<DailyRecord>> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let line = i + 2;
        let num = |j: usize| -> std::result::Result<f64, String> {
            row[j].parse::<f64>().map_err(|_| format!("line {line}, column `{}`: not a number", &headers[j]))
        };
        let int = |j: usize| -> std::result::Result<u32, String> {
            row[j].parse::<u32>().map_err(|_| format!("line {line}, column `{}`: not a count", &headers[j]))
        };
        let rep = int(0)? as usize;
        if rep > traces.len() {
            return Err(format!("line {line}: replication {rep} out of order"));
        }
        if rep == traces.len() {
            traces.push(Vec::new());
        }
        let record = DailyRecord {
            day: int(1)?,
            census: int(2)?,
            arrivals: int(3)?,
            demand: [num(4)?, num(5)?, num(6)?],
            discharges: (7..width).map(int).collect::<std::result::Result<_, _>>()?,
        };
        if record.day as usize != traces[rep].len() {
            return Err(format!("line {line}: day {} out of order", record.day));
        }
        traces[rep].push(record);
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn daily_csv_rejects_out_of_order_rows() {
        let head = "replication,day,census,arrivals,demand_CNA,demand_LPN,demand_RN,discharges_a\n";
        let ok = format!("{head}0,0,1,1,2.5,1,0.5,0\n0,1,1,0,2,1,0,0\n1,0,0,0,0,0,0,0\n1,1,0,0,0,0,0,0\n");
        let t = read_daily_csv(ok.as_bytes(), 1).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0][0].demand, [2.5, 1.0, 0.5]);
        let skip = format!("{head}0,1,1,1,2,1,0,0\n");
        assert!(read_daily_csv(skip.as_bytes(), 1).unwrap_err().contains("day 1"));
        assert!(read_daily_csv(ok.as_bytes(), 2).is_err());
    }

    #[test]
    fn scenario_names() {
        assert!(check_scenario_name("winter_2024-a").is_ok());
        for bad in ["", "a/b", "..", "x y"] {
            assert!(check_scenario_name(bad).is_err(), "{bad}");
        }
    }
}
