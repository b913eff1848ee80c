//! Pipeline driver for the memorization audit.
//!
//! A run is a fixed sequence of [`Stage`]s writing into one output
//! directory. Each stage reads only what earlier stages wrote there, records
//! a checkpoint keyed by the config hash, and is skipped on a rerun with the
//! same config. Everything except `manifest.json` is a pure function of the
//! config, so two runs produce byte-identical bundles.

pub mod config;
pub mod manifest;
pub mod pipeline;
mod report;
mod stages;

pub use config::{CrfMode, RunConfig};
pub use manifest::Manifest;
pub use pipeline::{Pipeline, Stage};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage {stage} failed: {source:#}")]
    Stage {
        stage: &'static str,
        source: anyhow::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while computing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}
