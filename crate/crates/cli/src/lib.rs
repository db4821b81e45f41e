//! Configuration, pipeline orchestration and reporting for the `fracquant` binary.

pub mod checks;
pub mod config;
pub mod pipeline;
pub mod report;
