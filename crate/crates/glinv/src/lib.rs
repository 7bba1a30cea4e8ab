//! Configuration, file formats and command implementations behind the
//! `glinv` binary.

pub mod check;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod table;

pub use config::{Overrides, RunConfig, Snapshot};
pub use error::CliError;
