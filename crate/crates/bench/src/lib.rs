//! Synthetic data generation, multi-seed experiments with shared
//! initializations, rankings, averaged error curves and the `ibpg` command
//! line.

pub mod cli;
pub mod data;
mod error;
pub mod experiment;
pub mod ranking;
pub mod records;

pub use error::{BenchError, Result};
