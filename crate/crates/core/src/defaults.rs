//! Shipped default inputs: NB(4.95, 0.64) arrivals and two-disposition LOS parameters, the baseline
//! census composition, S1–S3 presets, the 12-group rule set and a
//! placeholder staff-time table.

use std::collections::BTreeMap;

use crate::census::{ArrivalModel, CensusScenario, ProfileSource, ScenarioTransform};
use crate::error::{Error, Result};
use crate::service_need::{ClassificationRules, StaffTimeTable};
use crate::sim::{LosSamplerKind, SimulationConfig};
use crate::survival::FittedLosModel;

pub const BASELINE_SCENARIO_JSON: &str = include_str!("../data/scenario_baseline.json");
pub const SCENARIO_PRESETS_JSON: &str = include_str!("../data/scenario_presets.json");
pub const RULES_JSON: &str = include_str!("../data/rules_default.json");
pub const STAFF_TIME_JSON: &str = include_str!("../data/staff_time_default.json");
pub const LOS_JSON: &str = include_str!("../data/los_default.json");

pub fn default_arrivals() -> ArrivalModel {
    ArrivalModel::NegativeBinomial { r: 4.95, p: 0.64 }
}

pub fn default_los_model() -> FittedLosModel<f64> {
    let m: FittedLosModel<f64> = serde_json::from_str(LOS_JSON).expect("shipped LOS model parses");
    m.validate().expect("shipped LOS model is valid");
    m
}

pub fn baseline_scenario() -> CensusScenario {
    serde_json::from_str(BASELINE_SCENARIO_JSON).expect("shipped baseline scenario parses")
}

pub fn preset_transforms() -> BTreeMap<String, Vec<ScenarioTransform>> {
    serde_json::from_str(SCENARIO_PRESETS_JSON).expect("shipped presets parse")
}

/// Baseline or one of the S1–S3 presets derived from it.
pub fn scenario(name: &str) -> Result<CensusScenario> {
    if name.eq_ignore_ascii_case("baseline") {
        return Ok(baseline_scenario());
    }
    let presets = preset_transforms();
    let key = name.to_ascii_uppercase();
    let t = presets
        .get(&key)
        .ok_or_else(|| Error::Config(format!("unknown scenario `{name}` (expected baseline, S1, S2 or S3)")))?;
    Ok(baseline_scenario().derive(&key, t)?.scenario)
}

pub fn default_rules() -> ClassificationRules {
    ClassificationRules::from_json(RULES_JSON).expect("shipped rules are valid")
}

pub fn default_staff_table() -> StaffTimeTable {
    serde_json::from_str(STAFF_TIME_JSON).expect("shipped staff table parses")
}

/// One year, 90-day warmup, 20 replications at the default parameters.
pub fn default_config() -> SimulationConfig {
    SimulationConfig {
        horizon_days: 365,
        replications: 20,
        master_seed: 20_240_601,
        warmup_days: 90,
        arrival: default_arrivals(),
        los: default_los_model(),
        los_sampler: LosSamplerKind::default(),
        scenario: baseline_scenario(),
        profile_source: ProfileSource::Scenario,
        rules: default_rules(),
        staff_table: default_staff_table(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::census::Var;

    #[test]
    fn shipped_defaults_validate() {
        default_config().validate().unwrap();
        assert!(crate::service_need::lint_monotone(&default_rules(), &default_staff_table()).is_empty());
    }

    #[test]
    fn presets_are_valid_and_shift() {
        let base = baseline_scenario();
        let s1 = scenario("S1").unwrap();
        let s2 = scenario("s2").unwrap();
        let s3 = scenario("S3").unwrap();
        for s in [&s1, &s2, &s3] {
            s.validate().unwrap();
        }
        assert!((s1.mean(Var::X1) - 0.4 * base.mean(Var::X1)).abs() < 1e-9);
        assert!((s2.mean(Var::X1) - 1.6 * base.mean(Var::X1)).abs() < 1e-9);
        assert!((s3.mass(Var::X4, 1, 5) - 0.5 * base.mass(Var::X4, 1, 5)).abs() < 1e-12);
        assert!(scenario("S9").is_err());
    }

    #[test]
    fn baseline_bands() {
        let b = baseline_scenario();
        assert!((b.mass(Var::X1, 2, 10) - 0.75).abs() < 1e-12);
        assert!((b.mass(Var::X1, 11, 16) - 0.20).abs() < 1e-12);
        assert!((b.mass(Var::X4, 3, 5) - 0.77).abs() < 1e-12);
        assert!((b.mass(Var::X5, 1, 3) - 0.04).abs() < 1e-12);
        assert!((b.mass(Var::X9, 1, 1) - 0.127).abs() < 1e-12);
    }
}
