//! Parameters, coupling matrices, reproduction numbers and decay certificates.

pub mod certificate;
pub mod contact;
pub mod instance;
pub mod network;
pub mod params;
pub mod state;

pub use certificate::{
    calibrate_transmission, check_decay_certificate, effective_reproduction_number, StabilityCertificate,
};
pub use contact::{intrinsic_connectivity, project_contact_matrix, ContactStructure};
pub use instance::{Coupling, CovidInstance};
pub use network::{build_demographic_coupling, build_flow_matrix, FlowMatrices, NetworkInstance};
pub use params::{compute_b1, CellRates, DiseaseParams, GroupRate, Transmission};
pub use state::EpidemicState;
