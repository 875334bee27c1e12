//! Writes a synthetic resident file: baseline profiles, default LOS model stays,
//! admissions spread over a year and censoring at day 365.
//!
//! `cargo run -p careflow-core --example make_fixture -- fixtures/synthetic.csv 50`

use careflow_core::census::{save_residents, sample_profile, ResidentRecord};
use careflow_core::defaults;
use careflow_core::sampler::{sample_by_latent_min, spawn_stream};
use careflow_core::survival::LosObservation;
use rand::Rng;

fn main() -> careflow_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "synthetic.csv".into());
    let n: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let scenario = defaults::baseline_scenario();
    let los = defaults::default_los_model();
    let mut records = Vec::new();
    for i in 0..n {
        let mut rng = spawn_stream(7, 0, i);
        let mut profile = sample_profile(&scenario, &mut rng);
        profile.admit_day = rng.random_range(0..365);
        let s = sample_by_latent_min(&los, &mut rng);
        // keep three significant decimals so the file stays readable
        let t = (s.los_days * 1000.0).round().max(1.0) / 1000.0;
        let window = f64::from(365 - profile.admit_day);
        let obs = if t > window { LosObservation::censored(window) } else { LosObservation::discharged(t, s.disposition) };
        records.push(ResidentRecord { resident_id: format!("R{:04}", i + 1), profile, los: obs });
    }
    save_residents(&path, &records, &los.dispositions)?;
    println!("{path}");
    Ok(())
}
