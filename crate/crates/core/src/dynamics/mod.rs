//! Integrators and right-hand sides for the network and age-structured models.

pub mod bubar;
pub mod covid;
pub mod integrate;
pub mod simulate;

pub use bubar::{BubarModel, BubarState, BubarSystem};
pub use covid::{apply_vaccination_event, rhs_covid, rhs_covid_demographic, CovidSystem};
pub use integrate::{advance, integrate, OdeSystem, Solution};
pub use simulate::{simulate_bubar, simulate_policy, BubarTrajectory, Trajectory, VaccinationSchedule, DEFAULT_STEP};
