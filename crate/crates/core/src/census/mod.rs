//! Resident arrivals, attribute profiles and census-composition scenarios.

mod arrivals;
mod profile;
mod residents;

pub use arrivals::{
    arrival_log_likelihood, chi_square_gof, fit_arrivals, pearson_statistic, sample_arrivals,
    ArrivalFamily, ArrivalModel, GofBin, GofResult,
};
pub use profile::{
    sample_profile, CensusScenario, ProfileSource, ResidentProfile, ScenarioReport,
    ScenarioTransform, Var, VAR_RANGES,
};
pub(crate) use arrivals::sample_one;
pub use residents::{load_residents, read_residents, save_residents, write_residents, ResidentRecord, SCHEMA_LINE};
