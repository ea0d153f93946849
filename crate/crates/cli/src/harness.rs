use std::io::Write;
use std::path::Path;

use lovegp::exact::{exact_sample, fit_hyperparameters, ExactGp, FitOptions};
use lovegp::kernels::{
    build_grid, AdditiveKernel, AdditiveStructure, Kernel, KernelRegistry, KernelTerm,
    MixtureComponent, Rbf, SpectralMixture, TermSpec,
};
use lovegp::ski::{LoveCache, LoveOptions, SkiModel};
use lovegp::variance::{SkiCg, VarianceRegistry, VarianceStrategy};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{DatasetSpec, HyperparameterFile, RunConfig};
use crate::dataset::{load_airline, load_dataset, synthetic, LoadedData};
use crate::error::{CliError, ErrorKind, Phase, Result};
use crate::metrics::{elementwise_mae, max_relative_error, sample_covariance, smae};
use crate::report::{
    Accuracy, BenchmarkReport, Environment, ProblemSummary, SamplingMetrics, ScalingPoint,
    SweepPoint, Timings,
};
use crate::timing::{interleaved_medians, median_seconds, timed};

/// A loaded dataset and the SKI model built on it.
pub struct Problem {
    pub data: LoadedData,
    pub model: SkiModel,
    pub kernel: Vec<TermSpec>,
}

impl Problem {
    pub fn summary(&self, cfg: &RunConfig) -> ProblemSummary {
        ProblemSummary {
            n: self.data.n(),
            t: self.data.t(),
            input_dims: self.data.dims(),
            grid_sizes: self.model.structure().grids.iter().map(|g| g.count).collect(),
            m_total: self.model.m(),
            noise: self.model.noise(),
            kernel: self.kernel.clone(),
            rejected_rows: self.data.rejected_rows,
            strategy: cfg.strategy.clone(),
            k_requested: cfg.k,
            k_effective: None,
        }
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<LoadedData> {
    match &cfg.dataset {
        DatasetSpec::Csv {
            path,
            target,
            features,
            train_fraction,
            seed,
        } => load_dataset(path, target, features.as_deref(), *train_fraction, *seed),
        DatasetSpec::Synthetic { n, t, noise_std, seed } => Ok(synthetic(*n, *t, *noise_std, *seed)),
        DatasetSpec::Airline { path } => load_airline(path),
    }
}

/// Kernel terms and noise: the hyperparameter file if configured, else the
/// config's own values.
pub fn resolve_hyperparameters(cfg: &RunConfig) -> Result<(Vec<TermSpec>, f64)> {
    match &cfg.hyperparameters {
        Some(path) => {
            let h = HyperparameterFile::load(path)?;
            Ok((h.kernel, h.noise))
        }
        None => Ok((cfg.kernel.clone(), cfg.noise)),
    }
}

fn build_kernel(terms: &[TermSpec], dims: usize) -> Result<AdditiveKernel> {
    if let Some(t) = terms.iter().find(|t| t.dim >= dims) {
        return Err(CliError::config(format!(
            "kernel term uses input {} but the dataset has {dims} inputs",
            t.dim
        )));
    }
    Ok(AdditiveKernel::from_spec(terms, &KernelRegistry::builtin())?)
}

pub fn build_problem_from(cfg: &RunConfig, data: LoadedData) -> Result<Problem> {
    let (terms, noise) = resolve_hyperparameters(cfg)?;
    let kernel = build_kernel(&terms, data.dims())?;
    let grids = terms
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (lo, hi) = data.range(t.dim);
            build_grid(lo, hi, cfg.grid_size(i))
        })
        .collect::<lovegp::Result<Vec<_>>>()?;
    let structure = AdditiveStructure::new(kernel, grids)?;
    let ys = data.y_standardization;
    let raw_y: Vec<f64> = data.train_y.iter().map(|&z| ys.value(z)).collect();
    let model = SkiModel::with_standardization(structure, data.train_x.clone(), &raw_y, noise, ys)?;
    Ok(Problem {
        data,
        model,
        kernel: terms,
    })
}

pub fn build_problem(cfg: &RunConfig) -> Result<Problem> {
    cfg.validate()?;
    let data = load_data(cfg).phase("loading dataset")?;
    build_problem_from(cfg, data).phase("building model")
}

fn love_options(k: usize, k_sample: Option<usize>) -> LoveOptions {
    LoveOptions {
        k,
        k_sample,
        ..LoveOptions::default()
    }
}

fn registry(cfg: &RunConfig) -> VarianceRegistry {
    VarianceRegistry::builtin(love_options(cfg.k, None), cfg.dense_limit)
}

/// Oracle variances and means at the test inputs, where the problem is
/// small enough.
struct Oracles {
    dense_variances: Option<Vec<f64>>,
    exact_variances: Option<Vec<f64>>,
    exact_means: Option<Vec<f64>>,
}

fn oracles(cfg: &RunConfig, problem: &Problem) -> Result<Oracles> {
    let mut out = Oracles {
        dense_variances: None,
        exact_variances: None,
        exact_means: None,
    };
    if !cfg.oracles {
        return Ok(out);
    }
    let reg = registry(cfg);
    let x = &problem.data.test_x;
    let (n, m) = (problem.model.n(), problem.model.m());
    if n <= cfg.dense_limit && m <= cfg.dense_limit {
        let p = reg.get("ski-dense")?.prepare(&problem.model).phase("dense KISS-GP oracle")?;
        out.dense_variances = Some(p.variances(x).phase("dense KISS-GP oracle")?);
    } else {
        log::info!("skipping dense KISS-GP oracle: n = {n}, m = {m} exceed {}", cfg.dense_limit);
    }
    if n <= cfg.dense_limit {
        let p = reg.get("exact")?.prepare(&problem.model).phase("exact GP oracle")?;
        out.exact_variances = Some(p.variances(x).phase("exact GP oracle")?);
        out.exact_means = Some(p.means(x).phase("exact GP oracle")?);
    } else {
        log::info!("skipping exact GP oracle: n = {n} exceeds {}", cfg.dense_limit);
    }
    Ok(out)
}

fn accuracy_against(
    oracles: &Oracles,
    variances: &[f64],
    means: &[f64],
    y: &[f64],
) -> Result<Accuracy> {
    let opt = |r: &Option<Vec<f64>>, f: &dyn Fn(&[f64]) -> Result<f64>| r.as_deref().map(f).transpose();
    Ok(Accuracy {
        smae_vs_dense_ski: opt(&oracles.dense_variances, &|r| smae(variances, r, y))?,
        smae_vs_exact: opt(&oracles.exact_variances, &|r| smae(variances, r, y))?,
        max_rel_err_vs_dense_ski: opt(&oracles.dense_variances, &|r| max_relative_error(variances, r))?,
        max_rel_err_vs_exact: opt(&oracles.exact_variances, &|r| max_relative_error(variances, r))?,
        mean_smae_vs_exact: opt(&oracles.exact_means, &|r| smae(means, r, y))?,
        clamped_variances: 0,
    })
}

/// Precompute with the configured strategy, then time mean and variance
/// queries at every test point. Oracles run when the problem fits in the
/// dense limit.
pub fn run_variance_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    let problem = build_problem(cfg)?;
    variance_report(cfg, "bench-variance", &problem)
}

fn variance_report(cfg: &RunConfig, command: &str, problem: &Problem) -> Result<BenchmarkReport> {
    let reg = registry(cfg);
    let strategy = reg.get(&cfg.strategy)?;
    let (prepared, precompute_s) = timed(|| strategy.prepare(&problem.model));
    let prepared = prepared.phase("precompute")?;
    let x = &problem.data.test_x;
    let t = x.nrows() as f64;
    let variances = prepared.variances(x).phase("variance queries")?;
    let means = prepared.means(x).phase("mean queries")?;
    let variance_query_s = median_seconds(cfg.repetitions, || {
        let _ = prepared.variances(x);
    }) / t;
    let mean_query_s = median_seconds(cfg.repetitions, || {
        let _ = prepared.means(x);
    }) / t;

    let scratch = SkiCg::default().prepare(&problem.model)?;
    let first = x.rows(0, 1).into_owned();
    let variance_from_scratch_s = median_seconds(cfg.repetitions, || {
        let _ = scratch.variances(&first);
    });

    let oracles = oracles(cfg, problem)?;
    let mut accuracy = accuracy_against(&oracles, &variances, &means, problem.model.train_y())?;
    accuracy.clamped_variances = prepared.clamped();

    let mut summary = problem.summary(cfg);
    summary.k_effective = prepared.rank();
    let scaling = scaling_table(cfg)?;
    Ok(BenchmarkReport {
        command: command.into(),
        config: cfg.clone(),
        environment: Environment::current(),
        problem: summary,
        timings: Timings {
            precompute_s: Some(precompute_s),
            mean_query_s: Some(mean_query_s),
            variance_query_s: Some(variance_query_s),
            variance_from_scratch_s: Some(variance_from_scratch_s),
            repetitions: cfg.repetitions.max(crate::timing::MIN_REPETITIONS),
            ..Timings::default()
        },
        accuracy,
        sampling: None,
        sweep: Vec::new(),
        scaling,
    })
}

/// Per-query LOVE variance time as `n` grows, on the synthetic problem.
fn scaling_table(cfg: &RunConfig) -> Result<Vec<ScalingPoint>> {
    if cfg.scaling_n.is_empty() {
        return Ok(Vec::new());
    }
    let DatasetSpec::Synthetic { t, noise_std, seed, .. } = cfg.dataset else {
        return Err(CliError::config("scaling_n requires the synthetic dataset"));
    };
    let mut built = Vec::with_capacity(cfg.scaling_n.len());
    for &n in &cfg.scaling_n {
        let problem = build_problem_from(cfg, synthetic(n, t, noise_std, seed))?;
        let (cache, precompute_s) =
            timed(|| LoveCache::precompute(&problem.model, love_options(cfg.k, None)));
        built.push((n, problem, cache.phase("scaling precompute")?, precompute_s));
    }
    let mut queries: Vec<Box<dyn FnMut() + '_>> = built
        .iter()
        .map(|(_, problem, cache, _)| {
            let x = &problem.data.test_x;
            Box::new(move || {
                let _ = cache.variances_standardized(x);
            }) as Box<dyn FnMut()>
        })
        .collect();
    let medians = interleaved_medians(cfg.repetitions, &mut queries);
    Ok(built
        .iter()
        .zip(medians)
        .map(|((n, problem, _, precompute_s), batch)| ScalingPoint {
            n: *n,
            precompute_s: *precompute_s,
            variance_query_s: batch / problem.data.test_x.nrows() as f64,
        })
        .collect())
}

/// The variance benchmark plus LOVE accuracy for each `k` in `sweep_k`.
pub fn run_k_sweep(cfg: &RunConfig) -> Result<BenchmarkReport> {
    let problem = build_problem(cfg)?;
    let mut report = variance_report(cfg, "sweep-k", &problem)?;
    let oracles = oracles(cfg, &problem)?;
    let y = problem.model.train_y();
    let x = &problem.data.test_x;
    for &k in &cfg.sweep_k {
        let cache = LoveCache::precompute(&problem.model, love_options(k, None))
            .phase(&format!("precompute with k = {k}"))?;
        let v = cache.variances_standardized(x).phase("variance queries")?;
        let against = |r: &Option<Vec<f64>>| r.as_deref().map(|r| smae(&v, r, y)).transpose();
        report.sweep.push(SweepPoint {
            k,
            k_effective: cache.rank(),
            smae_vs_dense_ski: against(&oracles.dense_variances)?,
            smae_vs_exact: against(&oracles.exact_variances)?,
        });
    }
    Ok(report)
}

/// LOVE samples versus exact Cholesky samples at the test inputs, both
/// scored against the exact posterior covariance.
pub fn run_sampling_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    let problem = build_problem(cfg)?;
    let (cache, precompute_s) = timed(|| {
        LoveCache::precompute(&problem.model, love_options(cfg.k, Some(cfg.k_sample)))
    });
    let cache = cache.phase("precompute")?;
    let x = &problem.data.test_x;
    let w = cache.interp(x).phase("interpolating test inputs")?;
    let s = cfg.samples;
    let draws = cache.sample_posterior(&w, s, cfg.seed).phase("LOVE sampling")?;
    let sampling_s = median_seconds(cfg.repetitions, || {
        let _ = cache.sample_posterior(&w, s, cfg.seed);
    });

    let insufficient = s < 2;
    if insufficient {
        log::warn!("{s} sample(s) cannot estimate a covariance; reporting timings only");
    }
    let scale = problem.model.standardization().std.powi(2);
    let mut exact_sampling_s = None;
    let mut love_cov_mae = None;
    let mut exact_cov_mae = None;
    if cfg.oracles && problem.model.n() <= cfg.dense_limit {
        let gp = ExactGp::fit_with_limit(
            problem.model.train_x(),
            problem.model.train_y(),
            &problem.model.structure().kernel,
            problem.model.noise(),
            cfg.dense_limit,
        )
        .phase("exact GP oracle")?;
        let post = gp.posterior(x);
        let exact_draws = exact_sample(&post, s, cfg.seed).phase("exact sampling")?;
        exact_sampling_s = Some(median_seconds(cfg.repetitions, || {
            let _ = exact_sample(&post, s, cfg.seed);
        }));
        if let (Some(lc), Some(ec)) = (sample_covariance(&draws), sample_covariance(&exact_draws)) {
            love_cov_mae = Some(elementwise_mae(&(lc / scale), &post.cov)?);
            exact_cov_mae = Some(elementwise_mae(&ec, &post.cov)?);
        }
    }
    let mut summary = problem.summary(cfg);
    summary.k_effective = Some(cache.rank());
    summary.strategy = "love".into();
    Ok(BenchmarkReport {
        command: "bench-sampling".into(),
        config: cfg.clone(),
        environment: Environment::current(),
        problem: summary,
        timings: Timings {
            precompute_s: Some(precompute_s),
            sampling_s: Some(sampling_s),
            exact_sampling_s,
            repetitions: cfg.repetitions.max(crate::timing::MIN_REPETITIONS),
            ..Timings::default()
        },
        accuracy: Accuracy {
            clamped_variances: cache.clamped_count(),
            ..Accuracy::default()
        },
        sampling: Some(SamplingMetrics {
            samples: s,
            test_points: x.nrows(),
            k_sample: cache.sample_root().map_or(0, |r| r.ncols()),
            mae_ratio: love_cov_mae.zip(exact_cov_mae).map(|(l, e)| l / e),
            love_cov_mae,
            exact_cov_mae,
            insufficient_samples: insufficient,
        }),
        sweep: Vec::new(),
        scaling: Vec::new(),
    })
}

/// Data-driven random initialization for one kernel term.
fn random_term(term: &KernelTerm, x: &[f64], y_var: f64, rng: &mut ChaCha8Rng) -> Result<Box<dyn Kernel>> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = (sorted[sorted.len() - 1] - sorted[0]).max(1e-6);
    let spacing = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let nyquist = if spacing.is_finite() { 0.5 / spacing } else { 1.0 / range };
    Ok(match term.kernel.name() {
        "spectral_mixture" => {
            let q = term.kernel.unconstrained().len() / 3;
            let comps = (0..q)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    let v = (z.abs() / range).powi(2).max(1e-8);
                    MixtureComponent::new(y_var / q as f64, rng.random_range(0.0..nyquist), v)
                })
                .collect();
            Box::new(SpectralMixture::new(comps)?)
        }
        "rbf" => Box::new(Rbf::new(
            y_var * rng.random_range(0.5..1.5),
            range * rng.random_range(0.05..0.5),
        )?),
        _ => {
            let mut k = term.kernel.clone();
            let theta: Vec<f64> = k
                .unconstrained()
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(rng);
                    v + 0.5 * z
                })
                .collect();
            k.set_unconstrained(&theta)?;
            k
        }
    })
}

/// Exact-GP ADAM fits from the configured kernel (restart 0) and random
/// data-driven starts; keeps the best.
pub fn run_fit(cfg: &RunConfig) -> Result<HyperparameterFile> {
    cfg.validate()?;
    let data = load_data(cfg).phase("loading dataset")?;
    let base = build_kernel(&cfg.kernel, data.dims())?;
    let y_var = crate::metrics::variance(&data.train_y);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.fit.seed);
    let opts = FitOptions {
        steps: cfg.fit.steps,
        lr: cfg.fit.lr,
        dense_limit: cfg.dense_limit,
        ..FitOptions::default()
    };
    let mut best: Option<(f64, AdditiveKernel, f64)> = None;
    let mut lls = Vec::with_capacity(cfg.fit.restarts);
    for r in 0..cfg.fit.restarts {
        let init = if r == 0 {
            base.clone()
        } else {
            let terms = base
                .terms
                .iter()
                .map(|t| {
                    let x: Vec<f64> = data.train_x.column(t.dim).iter().copied().collect();
                    Ok(KernelTerm {
                        dim: t.dim,
                        kernel: random_term(t, &x, y_var, &mut rng)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            AdditiveKernel::new(terms)?
        };
        match fit_hyperparameters(&data.train_x, &data.train_y, &init, cfg.fit.noise_init, opts) {
            Ok(fit) => {
                log::info!("restart {r}: log marginal likelihood {:.4}", fit.log_likelihood);
                lls.push(fit.log_likelihood);
                if best.as_ref().is_none_or(|b| fit.log_likelihood > b.0) {
                    best = Some((fit.log_likelihood, fit.kernel, fit.noise));
                }
            }
            Err(e) => {
                log::warn!("restart {r} failed: {e}");
                lls.push(f64::NAN);
            }
        }
    }
    let (log_likelihood, kernel, noise) =
        best.ok_or_else(|| CliError::numerical("every fitting restart failed"))?;
    Ok(HyperparameterFile {
        kernel: kernel.to_spec(),
        noise,
        log_likelihood,
        fit: cfg.fit.clone(),
        restart_log_likelihoods: lls,
    })
}

/// Builds the LOVE cache, including the sampling root.
pub fn run_precompute(cfg: &RunConfig) -> Result<LoveCache> {
    let problem = build_problem(cfg)?;
    LoveCache::precompute(&problem.model, love_options(cfg.k, Some(cfg.k_sample))).phase("precompute")
}

/// The saved cache if `output.cache` exists, else a fresh precompute.
fn cache_for(cfg: &RunConfig, problem: &Problem) -> Result<LoveCache> {
    match &cfg.output.cache {
        Some(path) if path.exists() => {
            LoveCache::load(path, &KernelRegistry::builtin()).phase("loading cache")
        }
        _ => LoveCache::precompute(&problem.model, love_options(cfg.k, Some(cfg.k_sample)))
            .phase("precompute"),
    }
}

fn raw_inputs(data: &LoadedData, x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter()
        .map(|r| {
            r.iter()
                .zip(&data.x_standardization)
                .map(|(&v, s)| s.value(v))
                .collect()
        })
        .collect()
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => std::fs::File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::new(ErrorKind::Output, format!("cannot write {}: {e}", p.display()))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::new(ErrorKind::Output, format!("writing CSV: {e}"))
}

/// Writes `inputs…, target, mean, variance` in data units for every test
/// point; returns the number of rows.
pub fn run_predict(cfg: &RunConfig) -> Result<usize> {
    let problem = build_problem(cfg)?;
    let cache = cache_for(cfg, &problem)?;
    let x = &problem.data.test_x;
    let w = cache.interp(x).phase("interpolating test inputs")?;
    let mut out = csv::Writer::from_writer(open_output(cfg.output.predictions.as_deref())?);
    let mut header = problem.data.feature_names.clone();
    header.extend(["target", "mean", "variance"].map(String::from));
    out.write_record(&header).map_err(csv_error)?;
    let ys = problem.data.y_standardization;
    for (i, raw) in raw_inputs(&problem.data, x).into_iter().enumerate() {
        let p: Vec<f64> = x.row(i).iter().copied().collect();
        let var = cache
            .predict_variance(w.row(i), cache.prior_cov(&p, &p))
            .phase("variance queries")?;
        let mut rec: Vec<String> = raw.iter().map(f64::to_string).collect();
        rec.push(ys.value(problem.data.test_y[i]).to_string());
        rec.push(cache.predict_mean(w.row(i)).to_string());
        rec.push(var.to_string());
        out.write_record(&rec).map_err(csv_error)?;
    }
    out.flush().map_err(csv_error)?;
    Ok(x.nrows())
}

/// Writes `samples` posterior draws (data units) per test point, one row
/// per point.
pub fn run_sample(cfg: &RunConfig) -> Result<DMatrix<f64>> {
    let problem = build_problem(cfg)?;
    let mut cache = cache_for(cfg, &problem)?;
    if cache.sample_root().is_none() {
        cache.build_sample_cache(cfg.k_sample).phase("sampling cache")?;
    }
    let x = &problem.data.test_x;
    let w = cache.interp(x).phase("interpolating test inputs")?;
    let draws = cache.sample_posterior(&w, cfg.samples, cfg.seed).phase("sampling")?;
    let mut out = csv::Writer::from_writer(open_output(cfg.output.samples.as_deref())?);
    let mut header = problem.data.feature_names.clone();
    header.extend((0..cfg.samples).map(|j| format!("sample_{j}")));
    out.write_record(&header).map_err(csv_error)?;
    for (i, raw) in raw_inputs(&problem.data, x).into_iter().enumerate() {
        let rec: Vec<String> = raw
            .iter()
            .chain(draws.row(i).iter())
            .map(f64::to_string)
            .collect();
        out.write_record(&rec).map_err(csv_error)?;
    }
    out.flush().map_err(csv_error)?;
    Ok(draws)
}
