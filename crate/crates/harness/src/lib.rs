//! Experiment orchestration for two-parameter collective-measurement
//! metrology: configuration, seeded Monte-Carlo runs, reports and CSV tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::HarnessError;
