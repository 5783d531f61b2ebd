//! Raw data to calibrated instances: CSV readers, parameter derivations,
//! published fixtures and seeded synthetic networks.

pub mod derive;
pub mod files;
pub mod fixtures;
pub mod results;
pub mod synthetic;

use std::path::Path;

pub use derive::{
    aggregate_contact_groups, build_travel_rates, derive_disease_params, derive_group_disease_params,
    derive_group_initial_state, derive_initial_state, group_ifr, ifr_by_age, mean_ifr, median,
    median_infectious_periods, DerivedRates, NationalTotals, RawCases, RawMobility,
};
pub use files::{assemble_inputs, load_inputs, read_cases, read_dwell, read_trips, LoadedData};
pub use results::{bubar_from_rows, bubar_rows, read_rows, write_rows, AllocationRow, BubarRow, SummaryRow, SweepRow};
pub use synthetic::{synthetic_instance, SyntheticOptions};

use crate::error::Result;
use crate::dynamics::BubarModel;
use crate::model::CovidInstance;

pub fn read_instance(path: &Path) -> Result<CovidInstance> {
    let inst: CovidInstance = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    inst.validate()?;
    Ok(inst)
}

pub fn write_instance(inst: &CovidInstance, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(inst)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_bubar_model(path: &Path) -> Result<BubarModel> {
    let m: BubarModel = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
    m.validate()?;
    Ok(m)
}

pub fn write_bubar_model(model: &BubarModel, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(model)?)?;
    Ok(())
}
