//! Runs the default one-year simulation under baseline and S1–S3 and prints
//! mean post-warmup census, CNA demand and a staffing comparison.

use careflow_core::defaults;
use careflow_core::service_need::CaregiverType;
use careflow_core::sim;
use careflow_core::staffing::{compare, suggest_ratio, CostModel, StaffingStrategy, StrategyLabel};

fn main() -> careflow_core::Result<()> {
    let mut cost = CostModel::default();
    cost.cna.staff_day_minutes = 1440.0;
    for name in ["baseline", "S1", "S2", "S3"] {
        let mut cfg = defaults::default_config();
        cfg.scenario = defaults::scenario(name)?;
        let t = std::time::Instant::now();
        let out = sim::run(&cfg)?;
        let (mut census, mut cna, mut n) = (0.0, 0.0, 0.0);
        for days in out.post_warmup() {
            for d in days {
                census += f64::from(d.census);
                cna += d.demand_of(CaregiverType::Cna);
                n += 1.0;
            }
        }
        println!(
            "{name:>8}: census {:.2}  CNA/day {:.0}  CNA/resident {:.1}  ({:.2?})",
            census / n,
            cna / n,
            cna / census,
            t.elapsed()
        );
        if name == "baseline" {
            let strategies = [
                StaffingStrategy::new(CaregiverType::Cna, 20, StrategyLabel::State)?,
                StaffingStrategy::new(CaregiverType::Cna, 10, StrategyLabel::Facility)?,
            ];
            let (best, _) = suggest_ratio(&out, CaregiverType::Cna, &cost, 1..=60)?;
            let mut all = strategies.to_vec();
            all.push(best);
            for r in compare(&out, &all, &cost)?.rows {
                println!(
                    "          {:<10} total {:>12.1}  over {:>8.1}  under {:>8.1}",
                    r.strategy.name(),
                    r.total_cost_mean,
                    r.avg_daily_overstaffing_min,
                    r.avg_daily_understaffing_min
                );
            }
        }
    }
    Ok(())
}
