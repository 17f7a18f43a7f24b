//! Experiment runner behind the `quench` binary.

pub mod config;
pub mod experiments;
pub mod output;
