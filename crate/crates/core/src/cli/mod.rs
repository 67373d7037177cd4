//! Configuration and batch commands used by the `solmap` binary.

pub mod commands;
pub mod config;

pub use commands::{exit_code, Outcome};
pub use config::{RunConfig, SCHEMA};
