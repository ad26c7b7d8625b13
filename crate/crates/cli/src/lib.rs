//! Batch driver for the `rankone` library: JSON configs in, text reports
//! and CSV tables out.

pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, Command, Params, RunConfig, COMMANDS};
pub use error::CliError;
pub use run::{run, write_outputs, RunOutput};
