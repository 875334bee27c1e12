use std::io::Write;

use super::SimulationOutput;
use crate::error::Result;

/// `replication,day,census,arrivals,demand_CNA,demand_LPN,demand_RN,discharges_<label>...`
pub fn write_daily_csv<W: Write>(out: &SimulationOutput, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> =
        ["replication", "day", "census", "arrivals", "demand_CNA", "demand_LPN", "demand_RN"].map(String::from).to_vec();
    header.extend(out.dispositions.iter().map(|d| format!("discharges_{}", d.label)));
    wtr.write_record(&header)?;
    for r in &out.replications {
        for d in &r.days {
            let mut row = vec![r.replication.to_string(), d.day.to_string(), d.census.to_string(), d.arrivals.to_string()];
            row.extend(d.demand.iter().map(|m| format!("{m}")));
            row.extend(d.discharges.iter().map(|c| c.to_string()));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Trajectory log. The column names match the resident import schema, so
/// the file can be read back as observed data.
pub fn write_residents_csv<W: Write>(out: &SimulationOutput, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "replication",
        "resident_id",
        "admit_day",
        "x1",
        "x2",
        "x3",
        "x4",
        "x5",
        "x6",
        "x7",
        "x8",
        "x9",
        "group",
        "los_days",
        "disposition",
        "censored",
    ])?;
    for r in &out.replications {
        for res in &r.residents {
            let mut row = vec![
                r.replication.to_string(),
                format!("r{}-{}", r.replication, res.entity),
                res.profile.admit_day.to_string(),
            ];
            row.extend(res.profile.values().iter().map(|v| v.to_string()));
            row.push(res.group.to_string());
            row.push(format!("{}", res.observed_days(out.horizon_days)));
            let label = if res.censored {
                String::new()
            } else {
                out.dispositions.get(res.disposition.0 - 1).map(|d| d.label.clone()).unwrap_or_default()
            };
            row.push(label);
            row.push(if res.censored { "1" } else { "0" }.into());
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
