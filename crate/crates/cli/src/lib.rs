//! Library side of the `rpca` command-line tool: CSV and PGM readers, JSON
//! run reports, and the subcommand dispatcher used by the binary.

pub mod commands;
pub mod csv_io;
pub mod error;
pub mod pgm;
pub mod report;

pub use commands::run_command;
pub use error::{CliError, CliResult};
