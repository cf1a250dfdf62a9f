//! Monte Carlo harness for the Lasso-based treatment-effect estimators in
//! `ate-core`: configuration, the parallel repetition driver, and CSV export.

pub mod config;
pub mod export;
pub mod harness;

pub use config::{ConfigError, OutcomeModel, RunConfig};
pub use export::{write_outputs, ExportError};
pub use harness::{run, Cell, HarnessError, McReport};
