//! Command-line front end for `wvmp-core`: JSON experiment configs in,
//! CSV and JSON artifacts out.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] wvmp_core::Error),
    #[error("assertion failed: {0}")]
    AssertFailed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::AssertFailed(_) => 4,
        }
    }
}
