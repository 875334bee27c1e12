//! Operations shared by the CLI and the HTTP API.

use std::io::Read;
use std::ops::RangeInclusive;
use std::path::Path;

use careflow_core::census::{chi_square_gof, fit_arrivals, load_residents, read_residents, ArrivalFamily, ArrivalModel, GofResult, ResidentRecord};
use careflow_core::service_need::CaregiverType;
use careflow_core::sim::{self, SimulationConfig, SimulationOutput};
use careflow_core::staffing::{
    compare_with, evaluate_with, suggest_ratio_with, CostModel, EvalOptions, EvaluationReport, EvaluationRow,
    StaffingStrategy, StrategyLabel,
};
use careflow_core::survival::{fit, Disposition, DispositionId, FitOptions, FittedLosModel, LosDataset};
use careflow_core::validate::{km_overlay, ks_two_sample, KmOverlay, KsResult};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::{core_message, Error, Result};
use crate::store::{RunRecord, RunStatus, RunStore};

pub const DEFAULT_DISPOSITIONS: [&str; 2] = ["community", "hospital"];

pub fn dispositions(labels: &[String]) -> Vec<Disposition> {
    labels.iter().enumerate().map(|(i, l)| Disposition { id: DispositionId(i + 1), label: l.clone() }).collect()
}

pub fn default_disposition_labels() -> Vec<String> {
    DEFAULT_DISPOSITIONS.map(String::from).to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispositionCount {
    pub label: String,
    pub discharged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosFit {
    pub residents: usize,
    pub censored: usize,
    pub counts: Vec<DispositionCount>,
    pub model: FittedLosModel<f64>,
}

pub fn fit_los(records: &[ResidentRecord], disp: Vec<Disposition>) -> Result<LosFit> {
    let obs = records.iter().map(|r| r.los).collect();
    let data = LosDataset::new(obs, disp.clone())?;
    let model = fit(&data, None, FitOptions::default())?;
    let counts = disp
        .iter()
        .map(|d| DispositionCount {
            label: d.label.clone(),
            discharged: records.iter().filter(|r| r.los.disposition == Some(d.id)).count(),
        })
        .collect();
    Ok(LosFit {
        residents: records.len(),
        censored: records.iter().filter(|r| r.los.is_censored()).count(),
        counts,
        model,
    })
}

pub fn fit_los_reader<R: Read>(reader: R, labels: &[String]) -> Result<LosFit> {
    let disp = dispositions(labels);
    let records = read_residents(reader, &disp)?;
    fit_los(&records, disp)
}

pub fn fit_los_file(path: &Path, labels: &[String]) -> Result<LosFit> {
    let disp = dispositions(labels);
    let records = load_residents(path, &disp)?;
    fit_los(&records, disp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalFit {
    pub days: usize,
    pub sample_mean: f64,
    pub sample_variance: f64,
    pub model: ArrivalModel,
    /// Absent when too few bins remain after pooling.
    pub gof: Option<GofResult>,
}

/// Reads daily counts from the `arrivals` column, or the only column.
pub fn read_arrival_counts<R: Read>(reader: R) -> Result<Vec<u32>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let col = match headers.iter().position(|h| h == "arrivals") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(Error::Data("expected an `arrivals` column".into())),
    };
    let mut counts = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Data(e.to_string()))?;
        let v = row.get(col).unwrap_or("");
        counts.push(v.parse::<u32>().map_err(|_| {
            Error::Data(format!("row {}, column `{}`: `{v}` is not a non-negative integer", i + 2, &headers[col]))
        })?);
    }
    Ok(counts)
}

pub fn fit_arrival_counts(counts: &[u32], family: ArrivalFamily) -> Result<ArrivalFit> {
    let model = fit_arrivals(counts, family)?;
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| f64::from(c)).sum::<f64>() / n;
    let var = counts.iter().map(|&c| (f64::from(c) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ArrivalFit { days: counts.len(), sample_mean: mean, sample_variance: var, gof: chi_square_gof(counts, &model).ok(), model })
}

/// Runs a registered simulation and stores its artifacts, recording the
/// outcome in the index either way.
pub fn execute_run(store: &RunStore, id: Uuid) -> Result<RunRecord> {
    let record = store.set_status(id, RunStatus::Running, None)?;
    let result = sim::run(&record.config).map_err(Error::from).and_then(|out| store.persist(&record, &out));
    match result {
        Ok(_) => store.set_status(id, RunStatus::Done, None),
        Err(e) => {
            store.set_status(id, RunStatus::Failed, Some(e.to_string()))?;
            Err(e)
        }
    }
}

/// Registers and runs a simulation synchronously.
pub fn simulate(store: &RunStore, config: SimulationConfig) -> Result<RunRecord> {
    let record = store.create_run(config)?;
    execute_run(store, record.run_id)
}

/// Output of a finished run; 409-style conflict otherwise.
pub fn finished_output(store: &RunStore, id: Uuid) -> Result<SimulationOutput> {
    let record = store.get(id)?;
    match record.status {
        RunStatus::Done => store.load_output(id),
        RunStatus::Failed => Err(Error::Conflict(format!(
            "run {id} failed: {}",
            record.error.as_deref().unwrap_or("unknown error")
        ))),
        s => Err(Error::Conflict(format!("run {id} is {}", serde_json::to_string(&s).unwrap_or_default().trim_matches('"')))),
    }
}

pub fn default_strategies() -> Vec<StaffingStrategy> {
    vec![
        StaffingStrategy { caregiver_type: CaregiverType::Cna, k: 20, label: StrategyLabel::State },
        StaffingStrategy { caregiver_type: CaregiverType::Cna, k: 10, label: StrategyLabel::Facility },
    ]
}

pub fn parse_strategies<S: AsRef<str>>(items: &[S]) -> Result<Vec<StaffingStrategy>> {
    items
        .iter()
        .map(|s| StaffingStrategy::parse(s.as_ref()).map_err(|e| Error::config("strategies", core_message(&e))))
        .collect()
}

pub fn report(
    store: &RunStore,
    id: Uuid,
    strategies: &[StaffingStrategy],
    cost: &CostModel,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    if strategies.is_empty() {
        return Err(Error::config("strategies", "at least one strategy is required"));
    }
    let out = finished_output(store, id)?;
    Ok(compare_with(&out, strategies, cost, opts)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: u32,
    pub total_cost_mean: f64,
    pub avg_daily_overstaffing_min: f64,
    pub avg_daily_understaffing_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config_hash: String,
    pub caregiver_type: CaregiverType,
    pub k_min: u32,
    pub k_max: u32,
    pub suggested: StaffingStrategy,
    pub row: EvaluationRow,
    pub curve: Vec<SweepPoint>,
}

pub fn sweep(
    store: &RunStore,
    id: Uuid,
    caregiver_type: CaregiverType,
    k_range: RangeInclusive<u32>,
    cost: &CostModel,
    opts: &EvalOptions,
) -> Result<SweepResult> {
    if k_range.is_empty() || *k_range.start() < 1 {
        return Err(Error::config("k", format!("range {}..{} must be non-empty and start at 1 or above", k_range.start(), k_range.end())));
    }
    let out = finished_output(store, id)?;
    let (suggested, row) = suggest_ratio_with(&out, caregiver_type, cost, k_range.clone(), opts)?;
    let curve = k_range
        .clone()
        .map(|k| {
            let s = StaffingStrategy { caregiver_type, k, label: StrategyLabel::Custom };
            evaluate_with(&out, &s, cost, opts).map(|r| SweepPoint {
                k,
                total_cost_mean: r.total_cost_mean,
                avg_daily_overstaffing_min: r.avg_daily_overstaffing_min,
                avg_daily_understaffing_min: r.avg_daily_understaffing_min,
            })
        })
        .collect::<careflow_core::Result<_>>()?;
    Ok(SweepResult {
        config_hash: out.config_hash,
        caregiver_type,
        k_min: *k_range.start(),
        k_max: *k_range.end(),
        suggested,
        row,
        curve,
    })
}

/// Parses `a..b` or `a..=b` (both inclusive) or a single `k`.
pub fn parse_k_range(s: &str) -> Result<RangeInclusive<u32>> {
    let bad = || Error::Usage(format!("invalid k range `{s}`; expected e.g. 1..60"));
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
    match s.split_once("..") {
        Some((a, b)) => Ok(num(a)?..=num(b.trim_start_matches('='))?),
        None => {
            let k = num(s)?;
            Ok(k..=k)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub run_id: Uuid,
    pub config_hash: String,
    pub observed_residents: usize,
    pub simulated_residents: usize,
    /// Two-sample K-S on the LOS of discharged residents.
    pub los_ks: KsResult,
    /// sup |S_obs − S_sim| between the censored K-M curves.
    pub km_max_gap: f64,
}

/// Observed (time, event) pairs from the run's resident trajectory log.
fn simulated_los(store: &RunStore, id: Uuid) -> Result<(Vec<f64>, Vec<bool>)> {
    let path = store.artifact_path(id, "residents.csv");
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::Data(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Data(format!("residents.csv lacks `{name}`")))
    };
    let (los, censored) = (col("los_days")?, col("censored")?);
    let (mut t, mut ev) = (Vec::new(), Vec::new());
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Data(e.to_string()))?;
        t.push(row[los].parse::<f64>().map_err(|e| Error::Data(format!("residents.csv los_days: {e}")))?);
        ev.push(&row[censored] == "0");
    }
    Ok((t, ev))
}

pub fn validate_run(store: &RunStore, id: Uuid, observed: &Path, labels: &[String]) -> Result<(ValidationReport, KmOverlay)> {
    let record = store.get(id)?;
    if record.status != RunStatus::Done {
        return Err(Error::Conflict(format!("run {id} is not done")));
    }
    store.verify(id)?;
    let disp = dispositions(labels);
    let obs = load_residents(observed, &disp)?;
    let obs_t: Vec<f64> = obs.iter().map(|r| r.los.t_days).collect();
    let obs_ev: Vec<bool> = obs.iter().map(|r| !r.los.is_censored()).collect();
    let (sim_t, sim_ev) = simulated_los(store, id)?;
    let discharged = |t: &[f64], ev: &[bool]| t.iter().zip(ev).filter(|(_, &e)| e).map(|(&x, _)| x).collect::<Vec<_>>();
    let los_ks = ks_two_sample(&discharged(&obs_t, &obs_ev), &discharged(&sim_t, &sim_ev))?;
    let overlay = km_overlay((&obs_t, &obs_ev), (&sim_t, &sim_ev))?;
    let report = ValidationReport {
        run_id: id,
        config_hash: record.config_hash,
        observed_residents: obs.len(),
        simulated_residents: sim_t.len(),
        los_ks,
        km_max_gap: overlay.max_gap,
    };
    Ok((report, overlay))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("1..60").unwrap(), 1..=60);
        assert_eq!(parse_k_range("5..=9").unwrap(), 5..=9);
        assert_eq!(parse_k_range("14").unwrap(), 14..=14);
        assert!(parse_k_range("a..3").is_err());
    }

    #[test]
    fn arrival_counts_by_header_or_single_column() {
        assert_eq!(read_arrival_counts("day,arrivals\n0,3\n1,0\n".as_bytes()).unwrap(), [3, 0]);
        assert_eq!(read_arrival_counts("n\n4\n2\n".as_bytes()).unwrap(), [4, 2]);
        assert!(read_arrival_counts("a,b\n1,2\n".as_bytes()).is_err());
        let e = read_arrival_counts("arrivals\n2\n-1\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
    }
}
