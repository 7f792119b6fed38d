//! File formats, parallel sweep runner, reports and the `sgap` command line
//! on top of `sgap-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod report;
pub mod runner;

pub use error::{Error, FormatError, Result};
