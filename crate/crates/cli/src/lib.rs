//! Library side of the `bwkit` command-line tool: file formats, run reports,
//! subcommands and the invariant suites behind `bwkit check`.

pub mod checks;
pub mod commands;
pub mod error;
pub mod io;
pub mod report;
pub mod table1;

pub use error::CliError;
pub use report::{Check, RunReport};
