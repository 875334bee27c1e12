//! Staffing strategies, daily supply, labor cost and ratio search.

use std::io::Write;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::service_need::CaregiverType;
use crate::sim::{t_interval, SimulationOutput};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyLabel {
    State,
    Facility,
    Suggested,
    #[default]
    Custom,
}

/// One staff member of `caregiver_type` per `k` residents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffingStrategy {
    pub caregiver_type: CaregiverType,
    pub k: u32,
    #[serde(default)]
    pub label: StrategyLabel,
}

impl StaffingStrategy {
    pub fn new(caregiver_type: CaregiverType, k: u32, label: StrategyLabel) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidInput("ratio denominator k must be at least 1".into()));
        }
        Ok(StaffingStrategy { caregiver_type, k, label })
    }

    /// Parses `CNA:20` or `CNA:1/20`, optionally suffixed `@state` etc.
    pub fn parse(s: &str) -> Result<Self> {
        let (body, label) = match s.split_once('@') {
            Some((b, l)) => (b, serde_json::from_value(serde_json::Value::String(l.to_ascii_lowercase()))
                .map_err(|_| Error::InvalidInput(format!("unknown strategy label `{l}`")))?),
            None => (s, StrategyLabel::Custom),
        };
        let (t, k) = body
            .split_once(':')
            .ok_or_else(|| Error::InvalidInput(format!("strategy `{s}` is not TYPE:k")))?;
        let k = k.trim().strip_prefix("1/").unwrap_or(k.trim());
        let k: u32 = k.parse().map_err(|_| Error::InvalidInput(format!("strategy `{s}` has a bad ratio")))?;
        StaffingStrategy::new(t.trim().parse()?, k, label)
    }

    pub fn name(&self) -> String {
        format!("{}:1/{}", self.caregiver_type, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRates {
    pub regular_wage_per_min: f64,
    pub temp_wage_per_min: f64,
    #[serde(default = "default_staff_day")]
    pub staff_day_minutes: f64,
}

fn default_staff_day() -> f64 {
    480.0
}

impl CostRates {
    pub fn validate(&self) -> Result<()> {
        if !(self.regular_wage_per_min > 0.0 && self.temp_wage_per_min >= self.regular_wage_per_min) {
            return Err(Error::Config(format!(
                "wages need temp ({}) >= regular ({}) > 0",
                self.temp_wage_per_min, self.regular_wage_per_min
            )));
        }
        if !(self.staff_day_minutes > 0.0 && self.staff_day_minutes <= 1440.0) {
            return Err(Error::Config(format!("staff_day_minutes must be in (0, 1440], got {}", self.staff_day_minutes)));
        }
        Ok(())
    }
}

/// Per-type rates; wages are user inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(rename = "CNA")]
    pub cna: CostRates,
    #[serde(rename = "LPN")]
    pub lpn: CostRates,
    #[serde(rename = "RN")]
    pub rn: CostRates,
}

impl CostModel {
    pub fn rates(&self, k: CaregiverType) -> &CostRates {
        match k {
            CaregiverType::Cna => &self.cna,
            CaregiverType::Lpn => &self.lpn,
            CaregiverType::Rn => &self.rn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for k in CaregiverType::ALL {
            self.rates(k).validate().map_err(|e| Error::Config(format!("{k}: {e}")))?;
        }
        Ok(())
    }

    /// Same rates for every type.
    pub fn uniform(rates: CostRates) -> Self {
        CostModel { cna: rates, lpn: rates, rn: rates }
    }
}

impl Default for CostModel {
    /// Illustrative placeholder wages per minute with 8-hour staff days.
    fn default() -> Self {
        let r = |reg, temp| CostRates { regular_wage_per_min: reg, temp_wage_per_min: temp, staff_day_minutes: 480.0 };
        CostModel { cna: r(0.25, 0.40), lpn: r(0.42, 0.65), rn: r(0.60, 0.95) }
    }
}

/// How the staff count is derived each day.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CensusMode {
    /// Follow each day's census.
    #[default]
    Daily,
    /// Staff to a fixed planning census regardless of occupancy.
    Fixed { census: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub alpha: f64,
    pub census_mode: CensusMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { alpha: 0.05, census_mode: CensusMode::Daily }
    }
}

/// `(ceil(census / k), staff × staff_day_minutes)`.
pub fn daily_supply(census: u32, strategy: &StaffingStrategy, cost: &CostModel) -> (u32, f64) {
    let staff = census.div_ceil(strategy.k.max(1));
    (staff, f64::from(staff) * cost.rates(strategy.caregiver_type).staff_day_minutes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayLedger {
    pub day: u32,
    pub census: u32,
    pub staff: u32,
    pub supply: f64,
    pub demand: f64,
    /// Unmet minutes, max(0, demand − supply).
    pub under: f64,
    /// Idle minutes, max(0, supply − demand).
    pub over: f64,
    pub planned_cost: f64,
    pub understaffing_cost: f64,
}

/// Post-warmup day-by-day ledger for each replication.
pub fn day_ledgers(out: &SimulationOutput, strategy: &StaffingStrategy, cost: &CostModel, opts: &EvalOptions) -> Vec<Vec<DayLedger>> {
    let rates = cost.rates(strategy.caregiver_type);
    out.post_warmup()
        .map(|days| {
            days.iter()
                .map(|d| {
                    let census_for_staff = match opts.census_mode {
                        CensusMode::Daily => d.census,
                        CensusMode::Fixed { census } => census,
                    };
                    let (staff, supply) = daily_supply(census_for_staff, strategy, cost);
                    let demand = d.demand_of(strategy.caregiver_type);
                    let under = (demand - supply).max(0.0);
                    let over = (supply - demand).max(0.0);
                    DayLedger {
                        day: d.day,
                        census: d.census,
                        staff,
                        supply,
                        demand,
                        under,
                        over,
                        planned_cost: supply * rates.regular_wage_per_min,
                        understaffing_cost: under * rates.temp_wage_per_min,
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub strategy: StaffingStrategy,
    pub replications: usize,
    pub days_per_replication: usize,
    pub total_cost_mean: f64,
    pub total_cost_ci_lo: Option<f64>,
    pub total_cost_ci_hi: Option<f64>,
    pub planned_cost_mean: f64,
    pub understaffing_cost_mean: f64,
    pub avg_daily_overstaffing_min: f64,
    pub avg_daily_understaffing_min: f64,
    pub avg_daily_staff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config_hash: String,
    pub alpha: f64,
    pub cost: CostModel,
    pub rows: Vec<EvaluationRow>,
}

pub fn evaluate(out: &SimulationOutput, strategy: &StaffingStrategy, cost: &CostModel) -> Result<EvaluationRow> {
    evaluate_with(out, strategy, cost, &EvalOptions::default())
}

pub fn evaluate_with(
    out: &SimulationOutput,
    strategy: &StaffingStrategy,
    cost: &CostModel,
    opts: &EvalOptions,
) -> Result<EvaluationRow> {
    if strategy.k < 1 {
        return Err(Error::InvalidInput("ratio denominator k must be at least 1".into()));
    }
    cost.validate()?;
    let ledgers = day_ledgers(out, strategy, cost, opts);
    let days = ledgers.first().map_or(0, |l| l.len());
    if days == 0 {
        return Err(Error::Precondition("no post-warmup days to evaluate".into()));
    }
    let reps = ledgers.len();
    let mut totals = Vec::with_capacity(reps);
    let (mut planned, mut undercost, mut over, mut under, mut staff) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in &ledgers {
        let p: f64 = l.iter().map(|d| d.planned_cost).sum();
        let u: f64 = l.iter().map(|d| d.understaffing_cost).sum();
        totals.push(p + u);
        planned += p;
        undercost += u;
        over += l.iter().map(|d| d.over).sum::<f64>();
        under += l.iter().map(|d| d.under).sum::<f64>();
        staff += l.iter().map(|d| f64::from(d.staff)).sum::<f64>();
    }
    let (mean, half) = t_interval(&totals, opts.alpha);
    let r = reps as f64;
    let rd = r * days as f64;
    Ok(EvaluationRow {
        strategy: *strategy,
        replications: reps,
        days_per_replication: days,
        total_cost_mean: mean,
        total_cost_ci_lo: half.map(|h| mean - h),
        total_cost_ci_hi: half.map(|h| mean + h),
        planned_cost_mean: planned / r,
        understaffing_cost_mean: undercost / r,
        avg_daily_overstaffing_min: over / rd,
        avg_daily_understaffing_min: under / rd,
        avg_daily_staff: staff / rd,
    })
}

/// Evaluate several strategies on the same simulated demand.
pub fn compare(out: &SimulationOutput, strategies: &[StaffingStrategy], cost: &CostModel) -> Result<EvaluationReport> {
    compare_with(out, strategies, cost, &EvalOptions::default())
}

pub fn compare_with(
    out: &SimulationOutput,
    strategies: &[StaffingStrategy],
    cost: &CostModel,
    opts: &EvalOptions,
) -> Result<EvaluationReport> {
    if strategies.is_empty() {
        return Err(Error::InvalidInput("at least one strategy is required".into()));
    }
    let rows = strategies.iter().map(|s| evaluate_with(out, s, cost, opts)).collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport { config_hash: out.config_hash.clone(), alpha: opts.alpha, cost: *cost, rows })
}

/// Cost-minimizing k over `k_range`; exact ties go to the larger k.
pub fn suggest_ratio(
    out: &SimulationOutput,
    caregiver_type: CaregiverType,
    cost: &CostModel,
    k_range: RangeInclusive<u32>,
) -> Result<(StaffingStrategy, EvaluationRow)> {
    suggest_ratio_with(out, caregiver_type, cost, k_range, &EvalOptions::default())
}

pub fn suggest_ratio_with(
    out: &SimulationOutput,
    caregiver_type: CaregiverType,
    cost: &CostModel,
    k_range: RangeInclusive<u32>,
    opts: &EvalOptions,
) -> Result<(StaffingStrategy, EvaluationRow)> {
    if k_range.is_empty() || *k_range.start() < 1 {
        return Err(Error::InvalidInput(format!("k range {}..={} is empty or starts below 1", k_range.start(), k_range.end())));
    }
    let mut best: Option<EvaluationRow> = None;
    for k in k_range {
        let s = StaffingStrategy { caregiver_type, k, label: StrategyLabel::Suggested };
        let row = evaluate_with(out, &s, cost, opts)?;
        if best.as_ref().is_none_or(|b| row.total_cost_mean <= b.total_cost_mean) {
            best = Some(row);
        }
    }
    let row = best.expect("non-empty range");
    Ok((row.strategy, row))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One line per strategy, columns mirroring a cost comparison table.
pub fn write_report_csv<W: Write>(report: &EvaluationReport, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "caregiver_type",
        "ratio",
        "label",
        "total_cost_mean",
        "total_cost_ci_lo",
        "total_cost_ci_hi",
        "planned_cost_mean",
        "understaffing_cost_mean",
        "avg_daily_overstaffing_min",
        "avg_daily_understaffing_min",
        "replications",
        "config_hash",
    ])?;
    for r in &report.rows {
        let label = serde_json::to_value(r.strategy.label)?;
        wtr.write_record([
            r.strategy.caregiver_type.to_string(),
            format!("1/{}", r.strategy.k),
            label.as_str().unwrap_or_default().to_string(),
            format!("{}", r.total_cost_mean),
            opt(r.total_cost_ci_lo),
            opt(r.total_cost_ci_hi),
            format!("{}", r.planned_cost_mean),
            format!("{}", r.understaffing_cost_mean),
            format!("{}", r.avg_daily_overstaffing_min),
            format!("{}", r.avg_daily_understaffing_min),
            r.replications.to_string(),
            report.config_hash.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::DailyRecord;

    fn rec(day: u32, census: u32, cna: f64) -> DailyRecord {
        DailyRecord { day, census, arrivals: 0, demand: [cna, 0.0, 0.0], discharges: vec![] }
    }

    fn cna(k: u32) -> StaffingStrategy {
        StaffingStrategy::new(CaregiverType::Cna, k, StrategyLabel::Custom).unwrap()
    }

    #[test]
    fn supply_rounding() {
        let c = CostModel::default();
        assert_eq!(daily_supply(20, &cna(20), &c), (1, 480.0));
        assert_eq!(daily_supply(21, &cna(20), &c), (2, 960.0));
        assert_eq!(daily_supply(0, &cna(20), &c), (0, 0.0));
    }

    #[test]
    fn hand_ledger() {
        let cost = CostModel::uniform(CostRates { regular_wage_per_min: 0.5, temp_wage_per_min: 0.75, staff_day_minutes: 480.0 });
        let trace = vec![rec(0, 20, 500.0), rec(1, 20, 400.0), rec(2, 20, 480.0)];
        let out = SimulationOutput::from_daily(vec![], 0, vec![trace]).unwrap();
        let row = evaluate(&out, &cna(20), &cost).unwrap();
        assert!((row.total_cost_mean - 735.0).abs() < 1e-9);
        assert!(row.total_cost_ci_lo.is_none());
        assert!((row.avg_daily_understaffing_min - 20.0 / 3.0).abs() < 1e-12);
        assert!((row.avg_daily_overstaffing_min - 80.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_demand_picks_largest_k() {
        let cost = CostModel::default();
        let traces = (0..3).map(|_| (0..10).map(|d| rec(d, 37, 0.0)).collect()).collect();
        let out = SimulationOutput::from_daily(vec![], 2, traces).unwrap();
        let (s, _) = suggest_ratio(&out, CaregiverType::Cna, &cost, 1..=60).unwrap();
        assert_eq!(s.k, 60);
        let row = evaluate(&out, &cna(20), &cost).unwrap();
        assert_eq!(row.total_cost_mean, 8.0 * 2.0 * 480.0 * 0.25);
        assert_eq!(row.total_cost_ci_hi, Some(row.total_cost_mean));
    }

    #[test]
    fn fixed_census_mode() {
        let cost = CostModel::default();
        let out = SimulationOutput::from_daily(vec![], 0, vec![vec![rec(0, 5, 0.0), rec(1, 50, 0.0)]]).unwrap();
        let opts = EvalOptions { census_mode: CensusMode::Fixed { census: 20 }, ..Default::default() };
        let l = day_ledgers(&out, &cna(10), &cost, &opts);
        assert_eq!(l[0][0].staff, 2);
        assert_eq!(l[0][1].staff, 2);
    }

    #[test]
    fn parse_strategy() {
        let s = StaffingStrategy::parse("CNA:1/20@state").unwrap();
        assert_eq!((s.caregiver_type, s.k, s.label), (CaregiverType::Cna, 20, StrategyLabel::State));
        assert_eq!(StaffingStrategy::parse("rn:8").unwrap().k, 8);
        assert!(StaffingStrategy::parse("CNA:0").is_err());
        assert!(StaffingStrategy::parse("CNA").is_err());
    }

    #[test]
    fn bad_wages() {
        let mut c = CostModel::default();
        c.lpn.temp_wage_per_min = 0.1;
        assert!(c.validate().is_err());
    }
}
