//! Experiment orchestration, performance profiles and the `otgcf` command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod profile;

pub use cli::run;
