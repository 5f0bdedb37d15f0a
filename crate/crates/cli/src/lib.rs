//! Experiment driver: dataset loading, configuration and the commands that
//! train, ablate, sweep, benchmark and report.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

pub use commands::{run, Command, Outcome};
pub use config::ExperimentConfig;
pub use error::CliError;
