use std::path::{Path, PathBuf};

use lovegp::kernels::{KernelSpec, TermSpec};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Any numeric CSV with a header row; every non-target column (or the
    /// listed `features`) becomes an input dimension.
    Csv {
        path: PathBuf,
        target: String,
        #[serde(default)]
        features: Option<Vec<String>>,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `sin 2x + ½ cos 5x` plus Gaussian noise on `[-3, 3]`.
    Synthetic {
        n: usize,
        t: usize,
        #[serde(default = "default_noise_std")]
        noise_std: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Monthly passenger counts, first 96 months train, last 48 test.
    Airline { path: PathBuf },
}

fn default_train_fraction() -> f64 {
    0.8
}

fn default_noise_std() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub steps: usize,
    pub lr: f64,
    pub restarts: usize,
    pub seed: u64,
    pub noise_init: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            lr: 0.1,
            restarts: 4,
            seed: 0,
            noise_init: 0.01,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    pub plot_csv: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    pub hyperparameters: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub kernel: Vec<TermSpec>,
    /// Fitted kernel and noise; overrides `kernel` and `noise` when set.
    pub hyperparameters: Option<PathBuf>,
    /// Inducing points per additive term (one entry is shared by all terms).
    pub grid_sizes: Vec<usize>,
    pub noise: f64,
    pub k: usize,
    pub k_sample: usize,
    pub samples: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub strategy: String,
    pub oracles: bool,
    pub dense_limit: usize,
    pub sweep_k: Vec<usize>,
    pub scaling_n: Vec<usize>,
    pub fit: FitConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::Synthetic {
                n: 1000,
                t: 100,
                noise_std: default_noise_std(),
                seed: 0,
            },
            kernel: vec![rbf_term(1.0, 0.5)],
            hyperparameters: None,
            grid_sizes: vec![256],
            noise: 0.04,
            k: 50,
            k_sample: 50,
            samples: 1000,
            seed: 0,
            repetitions: 20,
            strategy: "love".into(),
            oracles: true,
            dense_limit: lovegp::exact::DEFAULT_DENSE_LIMIT,
            sweep_k: vec![5, 10, 20, 50, 100],
            scaling_n: Vec::new(),
            fit: FitConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

pub fn rbf_term(outputscale: f64, lengthscale: f64) -> TermSpec {
    TermSpec {
        dim: 0,
        kernel: KernelSpec {
            kind: "rbf".into(),
            params: json!({ "outputscale": outputscale, "lengthscale": lengthscale }),
        },
    }
}

/// Directory holding the bundled datasets: `$LOVEGP_DATA_DIR`, else the
/// repository's `data/`.
pub fn data_dir() -> PathBuf {
    std::env::var_os("LOVEGP_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub const PRESETS: &[&str] = &["synthetic", "airline"];

pub fn preset(name: &str) -> Result<RunConfig> {
    match name {
        "synthetic" => Ok(RunConfig::default()),
        "airline" => {
            let dir = data_dir();
            let components: Vec<Value> = (0..10)
                .map(|q| json!({ "weight": 0.1, "mean": 0.5 + q as f64, "variance": 0.01 }))
                .collect();
            Ok(RunConfig {
                dataset: DatasetSpec::Airline {
                    path: dir.join("airline.csv"),
                },
                kernel: vec![TermSpec {
                    dim: 0,
                    kernel: KernelSpec {
                        kind: "spectral_mixture".into(),
                        params: json!({ "components": components }),
                    },
                }],
                hyperparameters: Some(dir.join("airline_sm10.json")),
                grid_sizes: vec![1000],
                noise: 0.01,
                sweep_k: vec![5, 10, 20, 50],
                ..RunConfig::default()
            })
        }
        other => Err(CliError::config(format!(
            "unknown preset `{other}` (available: {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, everything else
/// replaces.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && k != "dataset" => {
                        merge_json(slot, v)
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    pub fn from_json(value: Value) -> Result<Self> {
        serde_json::from_value(value).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    /// `base` (or the defaults) overlaid with the JSON file at `path`.
    pub fn load_over(base: &RunConfig, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {} is not JSON: {e}", path.display())))?;
        let mut merged = serde_json::to_value(base).expect("config serializes");
        merge_json(&mut merged, patch);
        Self::from_json(merged)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::config(msg));
        match &self.dataset {
            DatasetSpec::Csv { train_fraction, target, .. } => {
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return bad(format!("train_fraction must lie in (0, 1), got {train_fraction}"));
                }
                if target.is_empty() {
                    return bad("dataset target column is empty".into());
                }
            }
            DatasetSpec::Synthetic { n, t, noise_std, .. } => {
                if *n == 0 || *t == 0 {
                    return bad("synthetic dataset needs n >= 1 and t >= 1".into());
                }
                if !(*noise_std >= 0.0) {
                    return bad(format!("noise_std must be non-negative, got {noise_std}"));
                }
            }
            DatasetSpec::Airline { .. } => {}
        }
        if self.kernel.is_empty() {
            return bad("kernel needs at least one term".into());
        }
        if self.grid_sizes.is_empty()
            || (self.grid_sizes.len() != 1 && self.grid_sizes.len() != self.kernel.len())
        {
            return bad(format!(
                "grid_sizes must have 1 or {} entries, got {}",
                self.kernel.len(),
                self.grid_sizes.len()
            ));
        }
        if let Some(&m) = self.grid_sizes.iter().find(|&&m| m < lovegp::kernels::Grid1D::MIN_POINTS) {
            return bad(format!("grid size {m} is below the minimum of 4"));
        }
        if self.k == 0 || self.k_sample == 0 {
            return bad("k and k_sample must be at least 1".into());
        }
        if self.sweep_k.contains(&0) {
            return bad("sweep_k entries must be at least 1".into());
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be positive, got {}", self.noise));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1".into());
        }
        if self.fit.restarts == 0 || !(self.fit.lr > 0.0) || !(self.fit.noise_init > 0.0) {
            return bad("fit needs restarts >= 1, lr > 0 and noise_init > 0".into());
        }
        Ok(())
    }

    pub fn grid_size(&self, term: usize) -> usize {
        if self.grid_sizes.len() == 1 {
            self.grid_sizes[0]
        } else {
            self.grid_sizes[term]
        }
    }
}

/// Fitted kernel and noise as written by `lovegp fit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterFile {
    pub kernel: Vec<TermSpec>,
    pub noise: f64,
    pub log_likelihood: f64,
    pub fit: FitConfig,
    pub restart_log_likelihoods: Vec<f64>,
}

impl HyperparameterFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read hyperparameters {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::config(format!("invalid hyperparameter file {}: {e}", path.display()))
        })
    }
}
