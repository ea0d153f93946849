//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::time::Instant;

use lovegp::kernels::Rbf;
use lovegp::linalg::dense_cholesky;
use lovegp::ski::{DenseSki, LoveCache, LoveOptions, PriorTerm, SkiModel};
use lovegp::solvers::{cg_solve, lanczos, CgOptions};
use lovegp::synthetic::{sine_1d, structure_for};
use lovegp_cli::config::{preset, DatasetSpec, RunConfig};
use lovegp_cli::harness;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

type Check = fn() -> Result<Outcome, String>;

fn synthetic_cfg(n: usize, t: usize, m: usize) -> RunConfig {
    RunConfig {
        dataset: DatasetSpec::Synthetic {
            n,
            t,
            noise_std: 0.2,
            seed: 42,
        },
        grid_sizes: vec![m],
        noise: 0.04,
        k: 50,
        k_sample: 50,
        ..RunConfig::default()
    }
}

fn love_vs_dense_ski() -> Result<Outcome, String> {
    let r = harness::run_variance_benchmark(&synthetic_cfg(500, 100, 128)).map_err(|e| e.to_string())?;
    let s = r.accuracy.smae_vs_dense_ski.ok_or("dense oracle did not run")?;
    Ok(outcome(s < 1e-4, format!("SMAE vs dense KISS-GP {s:.3e} (< 1e-4)")))
}

fn love_vs_exact() -> Result<Outcome, String> {
    let r = harness::run_variance_benchmark(&synthetic_cfg(500, 100, 512)).map_err(|e| e.to_string())?;
    let s = r.accuracy.smae_vs_exact.ok_or("exact oracle did not run")?;
    Ok(outcome(s < 5e-3, format!("SMAE vs exact GP {s:.3e} (< 5e-3)")))
}

fn airline() -> Result<Outcome, String> {
    let cfg = preset("airline").map_err(|e| e.to_string())?;
    let r = harness::run_variance_benchmark(&cfg).map_err(|e| e.to_string())?;
    let s = r.accuracy.smae_vs_exact.ok_or("exact oracle did not run")?;
    Ok(outcome(
        s < 1e-3,
        format!(
            "airline n = {}, t = {}, m = {}, k = {}: SMAE vs exact GP {s:.3e} (< 1e-3)",
            r.problem.n, r.problem.t, r.problem.m_total, r.problem.k_requested
        ),
    ))
}

fn k_sweep() -> Result<Outcome, String> {
    let mut cfg = synthetic_cfg(500, 100, 128);
    cfg.sweep_k = vec![5, 10, 20, 50];
    let r = harness::run_k_sweep(&cfg).map_err(|e| e.to_string())?;
    let s: Vec<f64> = r
        .sweep
        .iter()
        .map(|p| p.smae_vs_dense_ski.ok_or("dense oracle did not run"))
        .collect::<Result<_, _>>()?;
    let monotone = s.windows(2).all(|w| w[1] <= 1.1 * w[0]);
    let drop = s[s.len() - 1] <= s[0] / 100.0;
    let table: Vec<String> = r.sweep.iter().zip(&s).map(|(p, v)| format!("k={} {v:.2e}", p.k)).collect();
    Ok(outcome(
        monotone && drop,
        format!("SMAE by k: {} (non-increasing within 10%, last <= first/100)", table.join(", ")),
    ))
}

fn full_rank() -> Result<Outcome, String> {
    let data = sine_1d(100, 50, 0.2, 5);
    let s = structure_for(&data, Box::new(Rbf::new(1.0, 0.5).map_err(|e| e.to_string())?), 32)
        .map_err(|e| e.to_string())?;
    let model = SkiModel::new(s, data.train_x.clone(), &data.train_y, 0.04).map_err(|e| e.to_string())?;
    let mut cache = LoveCache::precompute(
        &model,
        LoveOptions {
            k: 100,
            k_sample: None,
            cg: CgOptions { tol: 1e-10, max_iter: 2000 },
        },
    )
    .map_err(|e| e.to_string())?;
    cache.build_sample_cache(32).map_err(|e| e.to_string())?;
    let dense = DenseSki::new(&model).map_err(|e| e.to_string())?;
    let reference = dense
        .variances_standardized(&model, &data.test_x, PriorTerm::Exact)
        .map_err(|e| e.to_string())?;
    let love = cache.variances_standardized(&data.test_x).map_err(|e| e.to_string())?;
    let var_err = love.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let root = cache.sample_root().ok_or("sampling root missing")?;
    let target = model.kuu().to_dense() - cache.factors().dense_product();
    let root_err = (root * root.transpose() - target).amax();
    Ok(outcome(
        var_err < 1e-8 && root_err < 1e-6,
        format!("max variance error {var_err:.2e} (< 1e-8), max |SS^T - (K - R^T R')| {root_err:.2e} (< 1e-6)"),
    ))
}

fn sampling() -> Result<Outcome, String> {
    let mut cfg = synthetic_cfg(500, 100, 512);
    cfg.samples = 1000;
    cfg.seed = 3;
    let r = harness::run_sampling_benchmark(&cfg).map_err(|e| e.to_string())?;
    let s = r.sampling.ok_or("no sampling metrics")?;
    let (l, e) = (s.love_cov_mae.ok_or("no LOVE MAE")?, s.exact_cov_mae.ok_or("no exact MAE")?);
    Ok(outcome(
        l <= 2.0 * e,
        format!("sample covariance MAE LOVE {l:.3e} vs exact Cholesky {e:.3e} (LOVE <= 2x exact)"),
    ))
}

fn constant_time_queries() -> Result<Outcome, String> {
    let mut cfg = synthetic_cfg(4096, 1000, 512);
    cfg.oracles = false;
    cfg.scaling_n = vec![4096, 32768];
    cfg.repetitions = 200;
    let r = harness::run_variance_benchmark(&cfg).map_err(|e| e.to_string())?;
    let (a, b) = (r.scaling[0].variance_query_s, r.scaling[1].variance_query_s);
    let diff = (a - b).abs() / a.min(b);
    Ok(outcome(
        diff < 0.5,
        format!("median per-query variance time n=4096 {:.3} us, n=32768 {:.3} us, difference {:.1}% (< 50%)", a * 1e6, b * 1e6, diff * 100.0),
    ))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(n, n) * (0.1 * n as f64)
}

fn solvers() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=200);
        let a = random_spd(n, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = cg_solve(&a, &b, CgOptions { tol: 1e-12, max_iter: 10 * n }).map_err(|e| e.to_string())?.x;
        let exact = dense_cholesky(&a).map_err(|e| e.to_string())?.solve_vec(&DVector::from_column_slice(&b));
        let rel = (DVector::from_vec(x) - &exact).norm() / exact.norm();
        worst = worst.max(rel);
    }

    let n = 200;
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let eigs = DVector::from_fn(n, |i, _| 10f64.powf(-10.0 * i as f64 / (n - 1) as f64));
    let a = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    let probe: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = lanczos(&a, &probe, 100).map_err(|e| e.to_string())?;
    let k = f.k_effective();
    let ortho = (f.q.tr_mul(&f.q) - DMatrix::identity(k, k)).amax();
    Ok(outcome(
        worst < 1e-6 && ortho < 1e-8,
        format!("CG worst relative error {worst:.2e} over 50 systems (< 1e-6), Lanczos max |Q^T Q - I| {ortho:.2e} at k = {k}, cond 1e10 (< 1e-8)"),
    ))
}

fn main() {
    let criteria: [(&str, &str, f64, Check); 8] = [
        ("1", "LOVE matches dense KISS-GP variances", 30.0, love_vs_dense_ski),
        ("2", "LOVE matches exact GP variances", 60.0, love_vs_exact),
        ("3", "airline spectral mixture", 300.0, airline),
        ("4", "error decays with Lanczos steps", 120.0, k_sweep),
        ("5", "full-rank exactness", 10.0, full_rank),
        ("6", "sampling fidelity", 60.0, sampling),
        ("7", "query time independent of n", 300.0, constant_time_queries),
        ("8", "solver properties", 60.0, solvers),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check);
        let secs = start.elapsed().as_secs_f64();
        let (passed, detail) = match result {
            Ok(Ok(o)) => (o.passed && secs < limit, o.detail),
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} [{id}] {name}: {detail}; {secs:.1} s (limit {limit:.0} s)",
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
