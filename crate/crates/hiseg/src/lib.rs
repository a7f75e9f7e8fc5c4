//! File formats, configuration and the `hiseg` command line on top of
//! `hiseg-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod report;

pub use error::{CliError, Result};
