//! Configuration, exports and the command-line driver for `boussinesq-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod manifest;
pub mod runner;

pub use config::{parse_config, parse_config_str, ConfigFile};
pub use error::CliError;
pub use manifest::RunManifest;
