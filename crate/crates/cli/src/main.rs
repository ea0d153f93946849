use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lovegp_cli::config::{preset, DatasetSpec, RunConfig};
use lovegp_cli::error::{CliError, ErrorKind};
use lovegp_cli::harness;
use lovegp_cli::report::BenchmarkReport;

#[derive(Parser)]
#[command(name = "lovegp", version, about = "KISS-GP regression with constant-time predictive variances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit kernel hyperparameters with the exact GP and write them as JSON.
    Fit(RunArgs),
    /// Build the LOVE cache and save it.
    Precompute(RunArgs),
    /// Predictive means and variances at the test inputs (CSV).
    Predict(RunArgs),
    /// Posterior samples at the test inputs (CSV).
    Sample(RunArgs),
    /// Variance accuracy and timing report.
    BenchVariance(RunArgs),
    /// Sample covariance accuracy and timing report.
    BenchSampling(RunArgs),
    /// Variance accuracy as a function of the number of Lanczos steps.
    SweepK(RunArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run config, applied over the preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Starting configuration: synthetic or airline.
    #[arg(long, default_value = "synthetic")]
    preset: String,
    /// CSV dataset; switches to CSV input (needs --target unless already set).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Hyperparameter file from `lovegp fit`.
    #[arg(long)]
    hyperparameters: Option<PathBuf>,
    /// Ignore any hyperparameter file and use the config kernel.
    #[arg(long)]
    no_hyperparameters: bool,
    /// Inducing points, one value or one per kernel term.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_sample: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    no_oracles: bool,
    #[arg(long)]
    dense_limit: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    scaling_n: Option<Vec<usize>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Report JSON path (stdout when absent).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    plot_csv: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output file for predict, sample and fit.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = preset(&self.preset)?;
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load_over(&base, path)?,
            None => base,
        };
        if let Some(path) = &self.dataset {
            let target = match (&self.target, &cfg.dataset) {
                (Some(t), _) => t.clone(),
                (None, DatasetSpec::Csv { target, .. }) => target.clone(),
                _ => return Err(CliError::config("--dataset needs --target")),
            };
            cfg.dataset = DatasetSpec::Csv {
                path: path.clone(),
                target,
                features: None,
                train_fraction: 0.8,
                seed: 0,
            };
        }
        if let DatasetSpec::Csv { target, train_fraction, seed, .. } = &mut cfg.dataset {
            if let Some(t) = &self.target {
                *target = t.clone();
            }
            if let Some(f) = self.train_fraction {
                *train_fraction = f;
            }
            if let Some(s) = self.split_seed {
                *seed = s;
            }
        }
        if self.no_hyperparameters {
            cfg.hyperparameters = None;
        }
        macro_rules! set {
            ($($field:ident).+ <- $arg:expr) => {
                if let Some(v) = $arg.clone() {
                    cfg.$($field).+ = v;
                }
            };
        }
        set!(grid_sizes <- self.m);
        set!(noise <- self.noise);
        set!(k <- self.k);
        set!(k_sample <- self.k_sample);
        set!(samples <- self.samples);
        set!(seed <- self.seed);
        set!(repetitions <- self.repetitions);
        set!(strategy <- self.strategy);
        set!(dense_limit <- self.dense_limit);
        set!(sweep_k <- self.sweep_k);
        set!(scaling_n <- self.scaling_n);
        set!(fit.steps <- self.steps);
        set!(fit.lr <- self.lr);
        set!(fit.restarts <- self.restarts);
        if self.hyperparameters.is_some() {
            cfg.hyperparameters = self.hyperparameters.clone();
        }
        if self.report.is_some() {
            cfg.output.report = self.report.clone();
        }
        if self.plot_csv.is_some() {
            cfg.output.plot_csv = self.plot_csv.clone();
        }
        if self.cache.is_some() {
            cfg.output.cache = self.cache.clone();
        }
        if self.no_oracles {
            cfg.oracles = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit_report(cfg: &RunConfig, report: &BenchmarkReport) -> Result<(), CliError> {
    match &cfg.output.report {
        Some(path) => {
            report.write(path)?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{}", report.to_json()),
    }
    if let Some(path) = &cfg.output.plot_csv {
        if report.sweep.is_empty() && report.scaling.is_empty() {
            log::warn!("no sweep or scaling data; plot CSV not written");
        } else {
            report.write_plot_csv(path)?;
            eprintln!("plot data written to {}", path.display());
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => {
            let mut cfg = args.resolve()?;
            cfg.output.hyperparameters = args.out.clone().or(cfg.output.hyperparameters);
            let fit = harness::run_fit(&cfg)?;
            let text = serde_json::to_string_pretty(&fit).expect("hyperparameters serialize");
            match &cfg.output.hyperparameters {
                Some(path) => {
                    std::fs::write(path, text).map_err(|e| {
                        CliError::new(ErrorKind::Output, format!("cannot write {}: {e}", path.display()))
                    })?;
                    eprintln!(
                        "log marginal likelihood {:.4}; hyperparameters written to {}",
                        fit.log_likelihood,
                        path.display()
                    );
                }
                None => println!("{text}"),
            }
        }
        Command::Precompute(args) => {
            let mut cfg = args.resolve()?;
            cfg.output.cache = args.out.clone().or(cfg.output.cache);
            let path = cfg
                .output
                .cache
                .clone()
                .ok_or_else(|| CliError::config("precompute needs --cache or --out"))?;
            let cache = harness::run_precompute(&cfg)?;
            cache.save(&path)?;
            eprintln!(
                "cache with rank {} over {} inducing points written to {}",
                cache.rank(),
                cache.structure().total_inducing(),
                path.display()
            );
        }
        Command::Predict(args) => {
            let mut cfg = args.resolve()?;
            cfg.output.predictions = args.out.clone().or(cfg.output.predictions);
            let rows = harness::run_predict(&cfg)?;
            log::info!("wrote {rows} predictions");
        }
        Command::Sample(args) => {
            let mut cfg = args.resolve()?;
            cfg.output.samples = args.out.clone().or(cfg.output.samples);
            harness::run_sample(&cfg)?;
        }
        Command::BenchVariance(args) => {
            let cfg = args.resolve()?;
            emit_report(&cfg, &harness::run_variance_benchmark(&cfg)?)?;
        }
        Command::BenchSampling(args) => {
            let cfg = args.resolve()?;
            emit_report(&cfg, &harness::run_sampling_benchmark(&cfg)?)?;
        }
        Command::SweepK(args) => {
            let cfg = args.resolve()?;
            emit_report(&cfg, &harness::run_k_sweep(&cfg)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
