//! Configuration, artefact persistence, stage functions and the CLI.

pub mod cli;
pub mod config;
pub mod container;
pub mod manifest;
pub mod stages;

pub use config::PipelineConfig;
pub use manifest::{RunManifest, StageRecord};
pub use stages::run_all;
