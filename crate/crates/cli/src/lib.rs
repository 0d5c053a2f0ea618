//! Command-line front end of the `driftfv` solver: INI scenario files,
//! CSV/VTK output, run manifests and the diode reproduction suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

pub use commands::{equilibrium_only, reproduce, run_scenario, threads_from_env, OutputOverrides, ReproduceOptions};
pub use config::Config;
pub use error::CliError;
pub use manifest::RunManifest;
