//! Optimal stabilizing allocations: the diagonal LMI, the bilinear fallback,
//! decay-rate bisection under a budget, and the age-structured SEIR variant.

pub mod bilinear;
pub mod bubar;
pub mod lmi;
pub mod problem;
pub mod search;

pub use bilinear::{solve_bilinear, BilinearIterate};
pub use lmi::{coupling_is_pd, solve_diagonal_lmi};
pub use problem::{build_problem, covid_certificate, AllocationProblem, AllocationResult, SolverPath, SolverStats};
pub use search::{max_decay_binary_search, solve_allocation, solve_min_doses, SearchOutcome};
