//! Optimal stabilizing vaccine allocation for networked epidemic models.
//!
//! The crate covers the metapopulation model with and without age structure,
//! the age-structured SEIR variant, the allocation solvers built on spectral
//! decay certificates, dosing policies, simulation and data ingestion.

pub mod allocator;
pub mod dynamics;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod policies;

pub use error::{Error, Result};
