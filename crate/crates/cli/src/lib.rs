//! Batch front-end for `qbd-core`: scenario configs, survival tables, fits and
//! verification reports.

pub mod config;
pub mod error;
pub mod fit;
pub mod sweep;
pub mod verify;

pub use config::ScenarioConfig;
pub use error::CliError;
