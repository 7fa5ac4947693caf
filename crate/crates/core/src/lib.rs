//! Radial solver and diagnostics for the four-dimensional fully parabolic
//! chemotaxis system with indirect signal production
//!
//! ```text
//! u_t - Lap u + div(u grad v) = 0
//! v_t - d1 Lap v + lambda1 v  = w
//! w_t - d2 Lap w + lambda2 w  = u
//! ```
//!
//! posed on R^4 and reduced to radial profiles on a ball of radius `R`.

pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod functionals;
pub mod model;
pub mod picard;

pub use error::{Error, Result};
pub use model::{
    build_grid, gaussian_bump, lp_norm, mass, threshold_constants, Diagnostics, Field, Params,
    RadialGrid, State, Thresholds,
};
pub use evolution::{
    blowup_indicator, run, step, AdvectionScheme, BlowupReport, Record, RunMetadata, StepperConfig,
    TimeSeries, Verdict,
};
pub use functionals::InequalityReport;
pub use picard::{beta, i_lambda_p, picard_iterate, xt_norms, Exponents, MildData, MildSolver, WeightedTriple};
