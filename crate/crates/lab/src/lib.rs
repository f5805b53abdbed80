//! Harness around `typicality-core`: the experiment catalog, TOML
//! configuration, a fixed-size worker pool, and report, CSV and SVG output.

mod catalog;
mod config;
mod runner;
pub mod svg;

pub use catalog::{list_experiments, CatalogEntry, Experiment};
pub use config::{ConfigFile, ExperimentConfig, Overrides, DEFAULT_OUT, OUT_ENV};
pub use runner::{artifact_dir, run_experiment, write_artifacts};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] typicality_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// 2 for bad input, 3 for numerical or integration failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
