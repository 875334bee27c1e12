//! Day-granular resident-flow simulation.

mod io;
mod summary;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::census::{sample_one, ArrivalModel, CensusScenario, ProfileSource, ResidentProfile};
use crate::error::{Error, Result};
use crate::sampler::{sample_by_latent_min, sample_by_total_hazard, spawn_stream, LosSample};
use crate::service_need::{
    classify, sample_daily_staff_time, CaregiverType, ClassificationRules, StaffTime, StaffTimeTable,
};
use crate::survival::{Disposition, DispositionId, FittedLosModel};

pub use io::{write_daily_csv, write_residents_csv};
pub use summary::{required_replications, summarize, t_interval, Band, BandKind, DaySummary, SeriesStats, Summary};

/// Number of caregiver types tracked in demand arrays.
pub const N_TYPES: usize = 3;

fn default_warmup() -> u32 {
    90
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosSamplerKind {
    /// Inverse transform on overall survival, then a categorical disposition draw.
    #[default]
    TotalHazard,
    LatentMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon_days: u32,
    pub replications: u32,
    pub master_seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_days: u32,
    pub arrival: ArrivalModel,
    pub los: FittedLosModel<f64>,
    #[serde(default)]
    pub los_sampler: LosSamplerKind,
    pub scenario: CensusScenario,
    #[serde(default)]
    pub profile_source: ProfileSource,
    pub rules: ClassificationRules,
    pub staff_table: StaffTimeTable,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        match self.field_errors().into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }

    /// Every validation failure, keyed by the top-level field it concerns.
    pub fn field_errors(&self) -> Vec<(&'static str, Error)> {
        let mut errs = Vec::new();
        if self.horizon_days < 1 {
            errs.push(("horizon_days", Error::Config("horizon_days must be at least 1".into())));
        }
        if self.replications < 1 {
            errs.push(("replications", Error::Config("replications must be at least 1".into())));
        }
        if self.warmup_days >= self.horizon_days {
            errs.push((
                "warmup_days",
                Error::Config(format!(
                    "warmup_days ({}) must be less than horizon_days ({})",
                    self.warmup_days, self.horizon_days
                )),
            ));
        }
        let mut check = |field, r: Result<()>| {
            if let Err(e) = r {
                errs.push((field, e));
            }
        };
        check("arrival", self.arrival.validate());
        check("los", self.los.validate());
        check("scenario", self.scenario.validate());
        check("profile_source", self.profile_source.validate());
        match self.rules.validate() {
            Ok(()) => check("staff_table", self.staff_table.validate_against(&self.rules)),
            Err(e) => check("rules", Err(e)),
        }
        errs
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day: u32,
    pub census: u32,
    pub arrivals: u32,
    /// Minutes indexed by [`CaregiverType::index`].
    pub demand: [f64; N_TYPES],
    /// Discharges indexed by disposition id − 1.
    pub discharges: Vec<u32>,
}

impl DailyRecord {
    pub fn demand_of(&self, k: CaregiverType) -> f64 {
        self.demand[k.index()]
    }

    pub fn total_discharges(&self) -> u32 {
        self.discharges.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentLog {
    /// 1-based entity index within the replication.
    pub entity: u32,
    pub profile: ResidentProfile,
    pub group: u32,
    /// Sampled length of stay.
    pub los_days: f64,
    pub disposition: DispositionId,
    /// Still present on the last simulated day.
    pub censored: bool,
    /// Per-day minutes from the admission day, clipped to the horizon.
    #[serde(skip)]
    pub daily_minutes: Vec<[f64; N_TYPES]>,
}

impl ResidentLog {
    pub fn stay_days(&self) -> u32 {
        self.los_days.ceil() as u32
    }

    /// Observed time: the LOS if discharged within the horizon, else time to horizon end.
    pub fn observed_days(&self, horizon: u32) -> f64 {
        if self.censored {
            f64::from(horizon - self.profile.admit_day)
        } else {
            self.los_days
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutput {
    pub replication: u32,
    pub days: Vec<DailyRecord>,
    pub residents: Vec<ResidentLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub config_hash: String,
    pub master_seed: u64,
    pub horizon_days: u32,
    pub warmup_days: u32,
    pub dispositions: Vec<Disposition>,
    pub replications: Vec<ReplicationOutput>,
}

impl SimulationOutput {
    /// Wrap externally produced daily traces, e.g. for evaluating recorded demand.
    pub fn from_daily(dispositions: Vec<Disposition>, warmup_days: u32, traces: Vec<Vec<DailyRecord>>) -> Result<Self> {
        let horizon = traces.first().map_or(0, |t| t.len());
        if traces.is_empty() || horizon == 0 {
            return Err(Error::InvalidInput("at least one non-empty trace is required".into()));
        }
        if traces.iter().any(|t| t.len() != horizon) {
            return Err(Error::InvalidInput("all traces must cover the same number of days".into()));
        }
        if warmup_days as usize >= horizon {
            return Err(Error::InvalidInput("warmup must be shorter than the trace".into()));
        }
        Ok(SimulationOutput {
            config_hash: String::new(),
            master_seed: 0,
            horizon_days: horizon as u32,
            warmup_days,
            dispositions,
            replications: traces
                .into_iter()
                .enumerate()
                .map(|(i, days)| ReplicationOutput { replication: i as u32, days, residents: Vec::new() })
                .collect(),
        })
    }

    /// Days after warmup, per replication.
    pub fn post_warmup(&self) -> impl Iterator<Item = &[DailyRecord]> {
        let w = self.warmup_days as usize;
        self.replications.iter().map(move |r| &r.days[w.min(r.days.len())..])
    }
}

struct Lookup {
    times: Vec<[StaffTime; N_TYPES]>,
}

impl Lookup {
    fn new(rules: &ClassificationRules, table: &StaffTimeTable) -> Self {
        let times = rules
            .groups
            .iter()
            .map(|g| CaregiverType::ALL.map(|k| table.get(k, g.id).expect("validated table")))
            .collect();
        Lookup { times }
    }
}

fn draw_los<R: Rng + ?Sized>(cfg: &SimulationConfig, rng: &mut R) -> LosSample {
    match cfg.los_sampler {
        LosSamplerKind::TotalHazard => sample_by_total_hazard(&cfg.los, rng),
        LosSamplerKind::LatentMin => sample_by_latent_min(&cfg.los, rng),
    }
}

/// One replication. Arrivals come from stream entity 0; resident e (from 1,
/// in admission order) draws profile, LOS and then daily minutes from entity e.
pub fn run_replication(cfg: &SimulationConfig, replication: u32) -> ReplicationOutput {
    let mut arrivals_rng = spawn_stream(cfg.master_seed, replication, 0);
    let arrivals: Vec<u32> = (0..cfg.horizon_days).map(|_| sample_one(&cfg.arrival, &mut arrivals_rng)).collect();
    run_replication_with_arrivals(cfg, replication, &arrivals)
}

/// Like [`run_replication`] with the daily arrival counts given.
pub fn run_replication_with_arrivals(cfg: &SimulationConfig, replication: u32, arrivals: &[u32]) -> ReplicationOutput {
    let horizon = cfg.horizon_days;
    let k = cfg.los.k();
    let lookup = Lookup::new(&cfg.rules, &cfg.staff_table);
    let mut days: Vec<DailyRecord> = (0..horizon)
        .map(|d| DailyRecord {
            day: d,
            census: 0,
            arrivals: arrivals.get(d as usize).copied().unwrap_or(0),
            demand: [0.0; N_TYPES],
            discharges: vec![0; k],
        })
        .collect();

    let mut residents = Vec::new();
    let mut entity = 0u32;
    for day in 0..horizon {
        for _ in 0..days[day as usize].arrivals {
            entity += 1;
            let mut rng = spawn_stream(cfg.master_seed, replication, entity);
            let mut profile = cfg.profile_source.draw(&cfg.scenario, &mut rng);
            profile.admit_day = day;
            let group = classify(&profile, &cfg.rules).id;
            let los = draw_los(cfg, &mut rng);
            let stay = los.los_days.ceil().max(1.0);
            let exit = f64::from(day) + stay;
            let last = (exit as u64).min(u64::from(horizon)) as u32;
            let times = &lookup.times[group as usize - 1];
            let mut daily_minutes = Vec::with_capacity((last - day) as usize);
            for d in day..last {
                let rec = &mut days[d as usize];
                rec.census += 1;
                let mut row = [0.0; N_TYPES];
                for (j, t) in times.iter().enumerate() {
                    row[j] = sample_daily_staff_time(*t, &mut rng);
                    rec.demand[j] += row[j];
                }
                daily_minutes.push(row);
            }
            let censored = exit >= f64::from(horizon);
            if !censored {
                days[exit as usize].discharges[los.disposition.0 - 1] += 1;
            }
            residents.push(ResidentLog {
                entity,
                profile,
                group,
                los_days: los.los_days,
                disposition: los.disposition,
                censored,
                daily_minutes,
            });
        }
    }
    ReplicationOutput { replication, days, residents }
}

fn assemble(cfg: &SimulationConfig, replications: Vec<ReplicationOutput>) -> SimulationOutput {
    SimulationOutput {
        config_hash: cfg.hash(),
        master_seed: cfg.master_seed,
        horizon_days: cfg.horizon_days,
        warmup_days: cfg.warmup_days,
        dispositions: cfg.los.dispositions.clone(),
        replications,
    }
}

/// All replications in parallel, merged by replication index.
pub fn run(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let reps = (0..cfg.replications).into_par_iter().map(|r| run_replication(cfg, r)).collect();
    Ok(assemble(cfg, reps))
}

/// Same result as [`run`] on the calling thread only.
pub fn run_serial(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let reps = (0..cfg.replications).map(|r| run_replication(cfg, r)).collect();
    Ok(assemble(cfg, reps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults;

    fn small(horizon: u32) -> SimulationConfig {
        let mut c = defaults::default_config();
        c.horizon_days = horizon;
        c.warmup_days = 0;
        c.replications = 3;
        c
    }

    #[test]
    fn zero_arrivals() {
        let mut c = small(10);
        c.arrival = ArrivalModel::Poisson { lambda: 0.0 };
        let out = run(&c).unwrap();
        for r in &out.replications {
            assert_eq!(r.days.len(), 10);
            assert!(r.days.iter().all(|d| d.census == 0 && d.arrivals == 0 && d.demand == [0.0; 3]));
        }
    }

    #[test]
    fn forced_single_resident() {
        let mut c = small(10);
        c.los = FittedLosModel::from_labeled(&[("community", 3.4f64.ln(), 1e-9)]).unwrap();
        let mut arrivals = vec![0; 10];
        arrivals[0] = 1;
        let r = run_replication_with_arrivals(&c, 0, &arrivals);
        let census: Vec<u32> = r.days.iter().map(|d| d.census).collect();
        assert_eq!(census, vec![1, 1, 1, 1, 0, 0, 0, 0, 0, 0]);
        assert!(r.days[..4].iter().all(|d| d.demand.iter().all(|&m| m > 0.0)));
        assert!(r.days[4..].iter().all(|d| d.demand == [0.0; 3]));
        assert_eq!(r.days[4].discharges, vec![1]);
        assert!(!r.residents[0].censored);
    }

    #[test]
    fn ledger_identity() {
        let out = run(&small(120)).unwrap();
        for r in &out.replications {
            let mut prev = 0i64;
            for d in &r.days {
                assert_eq!(i64::from(d.census), prev + i64::from(d.arrivals) - i64::from(d.total_discharges()));
                prev = i64::from(d.census);
            }
        }
    }

    #[test]
    fn serial_matches_parallel() {
        let c = small(60);
        assert_eq!(run(&c).unwrap(), run_serial(&c).unwrap());
        let one = SimulationConfig { replications: 1, ..c.clone() };
        assert_eq!(run(&one).unwrap().replications[0], run_replication(&c, 0));
    }

    #[test]
    fn warmup_must_be_shorter() {
        let mut c = small(10);
        c.warmup_days = 10;
        assert!(matches!(run(&c), Err(Error::Config(_))));
    }
}
