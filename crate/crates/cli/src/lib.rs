//! Batch driver for the `meanfield` solvers: JSON experiment configs in,
//! CSV/JSON artifacts and a one-line `key=value` summary out.

pub mod config;
pub mod error;
pub mod run;

pub use config::{Command, ExperimentConfig, Format};
pub use error::CliError;
pub use run::{run, Overrides, Summary};

/// Parses config bytes. Invalid UTF-8 and malformed JSON are parse errors.
pub fn parse_config(bytes: &[u8]) -> Result<ExperimentConfig, CliError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CliError::Parse(e.to_string()))?;
    ExperimentConfig::from_json(text).map_err(|e| CliError::Parse(e.to_string()))
}
