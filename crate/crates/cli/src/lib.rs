//! Experiment driver for the radial chemotaxis solver: scenario configs,
//! single runs, mass sweeps, the random inequality suite and the mild
//! solution cross-check, with CSV and JSON output.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Experiment, Overrides, ScenarioConfig};
pub use error::{CliError, CliResult, ErrorRecord};
pub use experiments::{
    inequality_suite, mass_sweep, picard_crosscheck, run_scenario, single_run, ExitReport,
};
