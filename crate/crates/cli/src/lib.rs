//! Configuration, orchestration and output for the `dqpt` binary.

pub mod config;
pub mod error;
pub mod output;
pub mod runs;

pub use config::ScenarioConfig;
pub use error::{CliError, Result};
