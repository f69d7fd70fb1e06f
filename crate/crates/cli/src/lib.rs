//! Scenario files, CSV/summary writers and the `solve`/`sweep`/`simulate`
//! commands behind the `flra` binary.

pub mod commands;
pub mod error;
pub mod format;
pub mod scenario;

pub use error::CliError;
pub use scenario::{ProtocolChoice, RangeSpec, ScenarioFile, SweepAxis};
