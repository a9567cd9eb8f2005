//! Configuration, the experiment runner, and the acceptance suite.

pub mod config;
pub mod runner;
pub mod verify;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use runner::{execute, execute_with_manifest, read_manifest, replay, run, Artifacts, RunManifest, RunOutcome};
