//! Seeded synthetic experiments on pullback geometries, driven by TOML
//! configuration files and written out as CSV plus a JSON manifest.

pub mod config;
pub mod datasets;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig};
pub use datasets::{generate_dataset, Dataset};
pub use runner::{run, RunReport, Status};
