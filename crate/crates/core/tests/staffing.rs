mod common;

use careflow_core::defaults;
use careflow_core::service_need::CaregiverType;
use careflow_core::sim::{run, DailyRecord, SimulationOutput};
use careflow_core::staffing::{
    compare, day_ledgers, evaluate, suggest_ratio, write_report_csv, CostModel, CostRates, EvalOptions,
    StaffingStrategy, StrategyLabel,
};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn cna(k: u32) -> StaffingStrategy {
    StaffingStrategy::new(CaregiverType::Cna, k, StrategyLabel::Custom).unwrap()
}

fn rates(reg: f64, temp: f64, minutes: f64) -> CostModel {
    CostModel::uniform(CostRates { regular_wage_per_min: reg, temp_wage_per_min: temp, staff_day_minutes: minutes })
}

fn traces_to_output(traces: &[Vec<(u32, f64)>]) -> SimulationOutput {
    let days = traces
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(d, &(census, demand))| DailyRecord {
                    day: d as u32,
                    census,
                    arrivals: 0,
                    demand: [demand, 0.0, 0.0],
                    discharges: vec![],
                })
                .collect()
        })
        .collect();
    SimulationOutput::from_daily(vec![], 0, days).unwrap()
}

fn random_traces(r: &mut impl Rng) -> Vec<Vec<(u32, f64)>> {
    let reps = r.random_range(1..6);
    let days = r.random_range(5..40);
    let per = r.random_range(20.0..200.0);
    (0..reps)
        .map(|_| {
            (0..days)
                .map(|_| {
                    let c = r.random_range(0..150);
                    (c, f64::from(c) * per * r.random_range(0.5..1.5))
                })
                .collect()
        })
        .collect()
}

#[test]
fn suggestion_matches_exhaustive_grid() {
    let mut r = rng(41);
    for _ in 0..20 {
        let traces = random_traces(&mut r);
        let reg = r.random_range(0.1..1.0);
        let temp = reg * r.random_range(1.0..3.0);
        let minutes = r.random_range(240.0..1440.0);
        let out = traces_to_output(&traces);
        let (s, row) = suggest_ratio(&out, CaregiverType::Cna, &rates(reg, temp, minutes), 1..=60).unwrap();
        let costs: Vec<f64> = (1..=60).map(|k| brute_cost(&traces, k, minutes, reg, temp)).collect();
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let want = (1..=60u32).rev().find(|&k| costs[k as usize - 1] <= min * (1.0 + 1e-12)).unwrap();
        assert_eq!(s.k, want);
        assert!((row.total_cost_mean - min).abs() <= 1e-9 * min.max(1.0));
    }
}

#[test]
fn two_regime_demand_has_interior_optimum() {
    let traces: Vec<Vec<(u32, f64)>> =
        (0..5).map(|rep| (0..60).map(|d| (100, 3500.0 + 300.0 * (((d + rep) % 7) as f64 - 3.0))).collect()).collect();
    let out = traces_to_output(&traces);
    let cost = rates(0.3, 0.9, 480.0);
    let k10 = evaluate(&out, &cna(10), &cost).unwrap();
    let k20 = evaluate(&out, &cna(20), &cost).unwrap();
    assert!(k10.avg_daily_overstaffing_min > 0.0 && k10.avg_daily_understaffing_min == 0.0);
    assert!(k20.avg_daily_understaffing_min > 0.0 && k20.avg_daily_overstaffing_min == 0.0);
    let (s, _) = suggest_ratio(&out, CaregiverType::Cna, &cost, 1..=60).unwrap();
    assert!(s.k > 10 && s.k < 20, "k = {}", s.k);
    let oracle = (1..=60).min_by(|&a, &b| {
        brute_cost(&traces, a, 480.0, 0.3, 0.9).total_cmp(&brute_cost(&traces, b, 480.0, 0.3, 0.9)).then(b.cmp(&a))
    });
    assert_eq!(Some(s.k), oracle);
}

#[test]
fn ledger_identities_on_simulated_runs() {
    let mut c = defaults::default_config();
    c.horizon_days = 150;
    c.warmup_days = 20;
    c.replications = 4;
    let out = run(&c).unwrap();
    for k in CaregiverType::ALL {
        for ratio in [1, 7, 20, 45] {
            let s = StaffingStrategy::new(k, ratio, StrategyLabel::Custom).unwrap();
            for rep in day_ledgers(&out, &s, &CostModel::default(), &EvalOptions::default()) {
                for d in rep {
                    assert_eq!(d.under * d.over, 0.0);
                    assert_eq!(d.demand - d.supply, d.under - d.over);
                }
            }
        }
    }
}

#[test]
fn compare_rows_independent_and_ordered() {
    let mut c = defaults::default_config();
    c.horizon_days = 120;
    c.warmup_days = 30;
    c.replications = 3;
    let out = run(&c).unwrap();
    let cost = CostModel::default();
    let one = compare(&out, &[cna(8)], &cost).unwrap();
    assert_eq!(one.rows[0], evaluate(&out, &cna(8), &cost).unwrap());
    let more = compare(&out, &[cna(8), cna(1), cna(3)], &cost).unwrap();
    assert_eq!(more.rows[0], one.rows[0]);
    let reversed = compare(&out, &[cna(3), cna(1), cna(8)], &cost).unwrap();
    assert_eq!(reversed.rows[2], one.rows[0]);
    assert_eq!(more.config_hash, c.hash());
    let mut csv = Vec::new();
    write_report_csv(&more, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("CNA,1/8,custom,"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_monotone_in_wages(
        seed in 0u64..1000,
        k in 1u32..40,
        reg in 0.05f64..1.0,
        bump in 0.0f64..0.5,
        spread in 1.0f64..3.0,
    ) {
        let traces = random_traces(&mut rng(seed));
        let out = traces_to_output(&traces);
        let base = evaluate(&out, &cna(k), &rates(reg, reg * spread, 480.0)).unwrap().total_cost_mean;
        let higher_reg = evaluate(&out, &cna(k), &rates(reg + bump, (reg + bump) * spread, 480.0)).unwrap().total_cost_mean;
        let higher_temp = evaluate(&out, &cna(k), &rates(reg, reg * spread + bump, 480.0)).unwrap().total_cost_mean;
        prop_assert!(higher_reg >= base);
        prop_assert!(higher_temp >= base);
    }

    #[test]
    fn suggestion_independent_of_range_direction(seed in 0u64..1000) {
        let traces = random_traces(&mut rng(seed));
        let out = traces_to_output(&traces);
        let cost = rates(0.3, 0.6, 480.0);
        let (s, row) = suggest_ratio(&out, CaregiverType::Cna, &cost, 1..=60).unwrap();
        for k in 1..=60 {
            prop_assert!(row.total_cost_mean <= evaluate(&out, &cna(k), &cost).unwrap().total_cost_mean);
        }
        prop_assert_eq!(s.label, StrategyLabel::Suggested);
    }
}
