use thiserror::Error;

/// Errors raised anywhere in the model, solver, simulation and ingest layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("zero total population at {0}")]
    ZeroPopulation(String),

    #[error("decay rate {alpha} is not below the smallest outflow rate {limit}")]
    InfeasibleRate { alpha: f64, limit: f64 },

    #[error("allocation outside box at cell {cell}: v = {value}, allowed [0, {cap}]")]
    AllocationOutOfBox { cell: usize, value: f64, cap: f64 },

    /// Even vaccinating every eligible person cannot certify the decay rate.
    #[error("infeasible: full vaccination cannot certify decay rate {alpha}")]
    Infeasible { alpha: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },

    #[error("policy emitted {emitted} doses but only {supplied} were supplied")]
    OverSupply { emitted: f64, supplied: f64 },

    #[error("depleted age group {0}: deaths reached the group population")]
    DepletedGroup(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
