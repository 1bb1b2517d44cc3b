//! Command-line front end for `ahcc-core`: TOML run configurations, binary
//! field files, JSON reports and timestamped run directories.

pub mod commands;
pub mod config;
pub mod error;
pub mod fieldio;
pub mod report;

pub use commands::{run, Command, Failure, Outcome};
pub use config::RunConfig;
pub use error::CliError;
pub use report::ReportDoc;
