use thiserror::Error;

/// Errors raised by the solver and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("negative values beyond tolerance: min {min:e} < -{tol:e}")]
    NegativeValues { min: f64, tol: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("CFL violation: dt = {dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite values at t = {time}")]
    NonFinite { time: f64 },

    #[error("time step collapsed to {dt:e} at t = {time}")]
    DtCollapse { dt: f64, time: f64 },

    #[error("Picard iteration failed to contract (ratios {ratios:?})")]
    NonContraction { ratios: Vec<f64> },

    #[error("series too short: {got} records, need at least {need}")]
    SeriesTooShort { got: usize, need: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
