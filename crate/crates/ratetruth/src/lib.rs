//! File formats, configuration and command implementations for the
//! `ratetruth` binary. The numerics live in `ratetruth-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod pgm;

pub use error::{CliError, Result};
