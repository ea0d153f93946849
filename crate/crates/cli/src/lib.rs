//! Command-line workflows around `lovegp`: dataset ingestion, run
//! configuration, precompute/predict/sample, benchmarks and reports.

pub mod config;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod report;
pub mod timing;

pub use config::{DatasetSpec, HyperparameterFile, RunConfig};
pub use error::{CliError, ErrorKind, Result};
pub use report::BenchmarkReport;
