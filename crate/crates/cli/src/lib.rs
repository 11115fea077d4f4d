//! Configuration, output and sweep plumbing for the `bathtub` command.

pub mod config;
mod error;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::{parse_config, RawConfig, RunConfig};
pub use error::{CliError, Result};
