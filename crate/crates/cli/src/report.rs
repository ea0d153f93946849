use std::path::Path;

use lovegp::kernels::TermSpec;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, ErrorKind, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub os: String,
    pub arch: String,
    pub available_threads: usize,
    pub debug_build: bool,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            available_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            debug_build: cfg!(debug_assertions),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub t: usize,
    pub input_dims: usize,
    pub grid_sizes: Vec<usize>,
    pub m_total: usize,
    pub noise: f64,
    pub kernel: Vec<TermSpec>,
    pub rejected_rows: usize,
    pub strategy: String,
    pub k_requested: usize,
    /// Lanczos steps actually taken; smaller than requested after an early
    /// invariant subspace.
    pub k_effective: Option<usize>,
}

/// Seconds. Query times are per test point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub precompute_s: Option<f64>,
    pub mean_query_s: Option<f64>,
    pub variance_query_s: Option<f64>,
    pub variance_from_scratch_s: Option<f64>,
    pub sampling_s: Option<f64>,
    pub exact_sampling_s: Option<f64>,
    pub repetitions: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub smae_vs_dense_ski: Option<f64>,
    pub smae_vs_exact: Option<f64>,
    pub max_rel_err_vs_dense_ski: Option<f64>,
    pub max_rel_err_vs_exact: Option<f64>,
    pub mean_smae_vs_exact: Option<f64>,
    pub clamped_variances: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMetrics {
    pub samples: usize,
    pub test_points: usize,
    pub k_sample: usize,
    pub love_cov_mae: Option<f64>,
    pub exact_cov_mae: Option<f64>,
    pub mae_ratio: Option<f64>,
    pub insufficient_samples: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub k_effective: usize,
    pub smae_vs_dense_ski: Option<f64>,
    pub smae_vs_exact: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub precompute_s: f64,
    pub variance_query_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub command: String,
    pub config: RunConfig,
    pub environment: Environment,
    pub problem: ProblemSummary,
    pub timings: Timings,
    pub accuracy: Accuracy,
    pub sampling: Option<SamplingMetrics>,
    pub sweep: Vec<SweepPoint>,
    pub scaling: Vec<ScalingPoint>,
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::new(ErrorKind::Output, format!("cannot write {}: {e}", path.display()))
}

impl BenchmarkReport {
    /// The fields that must be identical when a report is regenerated from
    /// its config (everything except wall times and environment).
    pub fn metrics(&self) -> serde_json::Value {
        serde_json::json!({
            "problem": self.problem,
            "accuracy": self.accuracy,
            "sampling": self.sampling,
            "sweep": self
                .sweep
                .iter()
                .map(|p| (p.k, p.k_effective, p.smae_vs_dense_ski, p.smae_vs_exact))
                .collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| output_error(path, e))
    }

    /// Plot data: the k sweep if present, else the n scaling table.
    pub fn write_plot_csv(&self, path: &Path) -> Result<()> {
        if !self.sweep.is_empty() {
            write_rows(path, &self.sweep)
        } else {
            write_rows(path, &self.scaling)
        }
    }
}

/// CSV with a header row derived from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| output_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| output_error(path, e))?;
    }
    w.flush().map_err(|e| output_error(path, e))
}
