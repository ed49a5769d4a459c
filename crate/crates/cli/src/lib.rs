//! Batch driver behind the `filamentlab` binary: configuration, mode
//! dispatch and artifact files.

pub mod config;
pub mod error;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
pub use run::{run, RunOutcome};
