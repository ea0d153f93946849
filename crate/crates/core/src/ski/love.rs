//! Lanczos variance estimates: test-independent caches that reduce
//! predictive means to a sparse dot product, (co)variances to O(k) work and
//! posterior samples to O(k(t + m)) per draw.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::model::{BlockToeplitz, SkiModel, Standardization};
use crate::error::{check_dim, Error, Result};
use crate::kernels::{AdditiveStructure, PointKernel};
use crate::linalg::{dot, Bidiagonal, InterpMatrix, TriDiag};
use crate::solvers::{cg_solve, lanczos, CgOptions, FnOperator};

pub const DEFAULT_K: usize = 50;

/// Variances down to this far below zero are clamped without a warning.
pub const CLAMP_SILENT: f64 = 1e-8;
/// Negative variances beyond this fraction of the prior variance are errors.
pub const CLAMP_RELATIVE_LIMIT: f64 = 1e-6;
/// Single jitter tried on the sampling tridiagonal, relative to its largest
/// diagonal entry.
pub const SAMPLE_JITTER: f64 = 1e-6;

/// One row of an interpolation matrix.
pub type InterpRow<'a> = (&'a [usize], &'a [f64]);

#[derive(Clone, Copy, Debug)]
pub struct LoveOptions {
    /// Lanczos iterations for the variance cache.
    pub k: usize,
    /// Lanczos iterations for the sampling root; `None` skips it.
    pub k_sample: Option<usize>,
    /// Solver settings for the mean cache.
    pub cg: CgOptions,
}

impl Default for LoveOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            k_sample: None,
            cg: CgOptions::default(),
        }
    }
}

/// `a = K_UU Wᵀ (W K_UU Wᵀ + σ²I)⁻¹ y` in standardized units.
pub fn build_mean_cache(model: &SkiModel, cg: CgOptions) -> Result<Vec<f64>> {
    let op = model.operator();
    let sol = cg_solve(&op, model.train_y(), cg)?;
    if !sol.converged {
        log::warn!(
            "mean cache CG stopped at relative residual {:e}",
            sol.relative_residual
        );
    }
    model.kuw_mvm(&sol.x)
}

/// Low-rank factors with `Rᵀ R′ ≈ K_UU Wᵀ (W K_UU Wᵀ + σ²I)⁻¹ W K_UU`.
///
/// Both are stored `k × m` column-major, so the column for one inducing
/// point is a contiguous `k`-slice.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceFactors {
    pub r: DMatrix<f64>,
    pub r_prime: DMatrix<f64>,
    /// Diagonal jitter added to `T` before factoring, zero if none.
    pub jitter: f64,
}

impl VarianceFactors {
    pub fn rank(&self) -> usize {
        self.r.nrows()
    }

    /// `Rᵀ R′` as a dense `m × m` matrix.
    pub fn dense_product(&self) -> DMatrix<f64> {
        self.r.tr_mul(&self.r_prime)
    }
}

fn factor_with_jitter(t: &TriDiag) -> Result<(Bidiagonal, f64)> {
    if let Ok(l) = t.cholesky() {
        return Ok((l, 0.0));
    }
    let mean = t.diag.iter().map(|d| d.abs()).sum::<f64>() / t.dim() as f64;
    let mut jitter = crate::linalg::dense::JITTER_START * mean.max(f64::MIN_POSITIVE);
    for _ in 0..=crate::linalg::dense::JITTER_ESCALATIONS {
        if let Ok(l) = t.with_jitter(jitter).cholesky() {
            log::debug!("Lanczos tridiagonal needed jitter {jitter:e}");
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    t.cholesky().map(|l| (l, 0.0))
}

/// `k` Lanczos steps on the training operator from the average column of
/// `W K_UU`, then `R = (K_UU Wᵀ Q)ᵀ` and `R′ = T⁻¹ R`.
pub fn love_precompute(model: &SkiModel, k: usize) -> Result<VarianceFactors> {
    if k == 0 {
        return Err(Error::InvalidParameter("LOVE needs k >= 1".into()));
    }
    let m = model.m();
    let ones = vec![1.0 / m as f64; m];
    let probe = model.w_train().apply(&model.kuu().mvm(&ones)?)?;
    let op = model.operator();
    let f = lanczos(&op, &probe, k)?;
    if f.broke_down() {
        log::info!(
            "Lanczos found an invariant subspace after {} of {} steps",
            f.k_effective(),
            f.requested
        );
    }
    let k_eff = f.k_effective();

    let mut r = DMatrix::zeros(k_eff, m);
    let mut buf = vec![0.0; m];
    for j in 0..k_eff {
        let wq = model.w_train().apply_transpose(f.q.column(j).as_slice())?;
        model.kuu().mvm_into(&wq, &mut buf);
        for (c, &v) in buf.iter().enumerate() {
            r[(j, c)] = v;
        }
    }

    let (l, jitter) = factor_with_jitter(&f.t)?;
    let mut r_prime = r.clone();
    for mut col in r_prime.column_iter_mut() {
        l.solve_in_place(col.as_mut_slice());
    }
    Ok(VarianceFactors { r, r_prime, jitter })
}

/// `S` with `S Sᵀ ≈ K_UU − Rᵀ R′` from `k′` Lanczos steps on that operator,
/// probed with the operator applied to the normalized all-ones vector.
pub fn build_sample_cache(model: &SkiModel, factors: &VarianceFactors, k_sample: usize) -> Result<DMatrix<f64>> {
    sample_root(model.kuu(), factors, k_sample)
}

pub(crate) fn sample_root(
    kuu: &BlockToeplitz,
    factors: &VarianceFactors,
    k_sample: usize,
) -> Result<DMatrix<f64>> {
    if k_sample == 0 {
        return Err(Error::InvalidParameter("sampling cache needs k' >= 1".into()));
    }
    let m = kuu.dim();
    check_dim("sampling cache factors", m, factors.r.ncols())?;
    let op = FnOperator::new(m, |v: &[f64], out: &mut [f64]| {
        kuu.mvm_into(v, out);
        let proj = &factors.r_prime * nalgebra::DVector::from_column_slice(v);
        let back = factors.r.tr_mul(&proj);
        for (o, b) in out.iter_mut().zip(back.iter()) {
            *o -= b;
        }
    });
    let start = vec![1.0 / (m as f64).sqrt(); m];
    let probe = crate::solvers::MvmOperator::apply(&op, &start);
    let f = lanczos(&op, &probe, k_sample)?;

    let l = match f.t.cholesky() {
        Ok(l) => l,
        Err(_) => {
            let max_diag = f.t.diag.iter().fold(0.0f64, |a, &d| a.max(d));
            f.t.with_jitter(SAMPLE_JITTER * max_diag)
                .cholesky()
                .map_err(|e| {
                    Error::Numerical(format!(
                        "sampling tridiagonal is indefinite ({e}); K_UU - RᵀR′ is not \
                         positive semi-definite at this accuracy, increase k"
                    ))
                })?
        }
    };

    let k_eff = f.k_effective();
    let mut s = DMatrix::zeros(m, k_eff);
    for j in 0..k_eff {
        let mut col = f.q.column(j) * l.diag[j];
        if j + 1 < k_eff {
            col += f.q.column(j + 1) * l.subdiag[j];
        }
        s.set_column(j, &col);
    }
    Ok(s)
}

/// Test-independent LOVE state plus what is needed to interpolate queries
/// and report them in data units.
#[derive(Debug)]
pub struct LoveCache {
    pub(crate) structure: AdditiveStructure,
    pub(crate) noise: f64,
    pub(crate) standardization: Standardization,
    pub(crate) mean_cache: Vec<f64>,
    pub(crate) factors: VarianceFactors,
    pub(crate) sample_root: Option<DMatrix<f64>>,
    clamped: AtomicUsize,
}

impl Clone for LoveCache {
    fn clone(&self) -> Self {
        Self {
            structure: self.structure.clone(),
            noise: self.noise,
            standardization: self.standardization,
            mean_cache: self.mean_cache.clone(),
            factors: self.factors.clone(),
            sample_root: self.sample_root.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl LoveCache {
    pub fn precompute(model: &SkiModel, opts: LoveOptions) -> Result<Self> {
        let mean_cache = build_mean_cache(model, opts.cg)?;
        let factors = love_precompute(model, opts.k)?;
        let sample_root = match opts.k_sample {
            Some(ks) => Some(build_sample_cache(model, &factors, ks)?),
            None => None,
        };
        Ok(Self::from_parts(
            model.structure().clone(),
            model.noise(),
            model.standardization(),
            mean_cache,
            factors,
            sample_root,
        ))
    }

    pub(crate) fn from_parts(
        structure: AdditiveStructure,
        noise: f64,
        standardization: Standardization,
        mean_cache: Vec<f64>,
        factors: VarianceFactors,
        sample_root: Option<DMatrix<f64>>,
    ) -> Self {
        Self {
            structure,
            noise,
            standardization,
            mean_cache,
            factors,
            sample_root,
            clamped: AtomicUsize::new(0),
        }
    }

    /// Builds (or rebuilds) the sampling root from the stored factors.
    pub fn build_sample_cache(&mut self, k_sample: usize) -> Result<()> {
        let kuu = BlockToeplitz::from_structure(&self.structure)?;
        self.sample_root = Some(sample_root(&kuu, &self.factors, k_sample)?);
        Ok(())
    }

    pub fn structure(&self) -> &AdditiveStructure {
        &self.structure
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn mean_cache(&self) -> &[f64] {
        &self.mean_cache
    }

    pub fn factors(&self) -> &VarianceFactors {
        &self.factors
    }

    pub fn sample_root(&self) -> Option<&DMatrix<f64>> {
        self.sample_root.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// Number of slightly negative variances clamped to zero so far.
    pub fn clamped_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn interp(&self, x: &DMatrix<f64>) -> Result<InterpMatrix> {
        super::interp::build_w(x, &self.structure)
    }

    /// Prior covariance `k(x_i, x_j)` in standardized units.
    pub fn prior_cov(&self, a: &[f64], b: &[f64]) -> f64 {
        self.structure.kernel.cov(a, b)
    }

    /// `w*ᵀ a`, standardized.
    pub fn mean_standardized(&self, row: InterpRow<'_>) -> f64 {
        let (idx, w) = row;
        idx.iter().zip(w).map(|(&j, &wj)| wj * self.mean_cache[j]).sum()
    }

    /// Predictive mean at one interpolated point, in data units.
    pub fn predict_mean(&self, row: InterpRow<'_>) -> f64 {
        self.standardization.value(self.mean_standardized(row))
    }

    /// `k(x_i, x_j) − (R w_i)ᵀ (R′ w_j)` in standardized units.
    pub fn covar_standardized(&self, wi: InterpRow<'_>, wj: InterpRow<'_>, prior: f64) -> f64 {
        let k = self.factors.rank();
        let r = self.factors.r.as_slice();
        let rp = self.factors.r_prime.as_slice();
        let mut u = vec![0.0; k];
        for (&c, &w) in wi.0.iter().zip(wi.1) {
            for (ui, &rv) in u.iter_mut().zip(&r[c * k..(c + 1) * k]) {
                *ui += w * rv;
            }
        }
        let correction: f64 = wj
            .0
            .iter()
            .zip(wj.1)
            .map(|(&c, &w)| w * dot(&u, &rp[c * k..(c + 1) * k]))
            .sum();
        prior - correction
    }

    /// Predictive covariance between two interpolated points, in data units.
    pub fn predict_covar(&self, wi: InterpRow<'_>, wj: InterpRow<'_>, prior: f64) -> f64 {
        self.standardization
            .variance(self.covar_standardized(wi, wj, prior))
    }

    /// Variance path of [`Self::covar_standardized`]: small negative values
    /// are clamped to zero and counted, large ones are errors.
    pub fn variance_standardized(&self, w: InterpRow<'_>, prior: f64) -> Result<f64> {
        let v = self.covar_standardized(w, w, prior);
        if v >= 0.0 {
            return Ok(v);
        }
        let limit = CLAMP_SILENT.max(CLAMP_RELATIVE_LIMIT * prior.abs());
        if v < -limit {
            return Err(Error::Numerical(format!(
                "negative predictive variance {v:e} (prior {prior:e})"
            )));
        }
        if v < -CLAMP_SILENT {
            log::warn!("clamping negative predictive variance {v:e} to zero");
        }
        self.clamped.fetch_add(1, Ordering::Relaxed);
        Ok(0.0)
    }

    pub fn predict_variance(&self, w: InterpRow<'_>, prior: f64) -> Result<f64> {
        Ok(self
            .standardization
            .variance(self.variance_standardized(w, prior)?))
    }

    /// Standardized predictive variances at every row of `x`.
    pub fn variances_standardized(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let w = self.interp(x)?;
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.iter()
            .enumerate()
            .map(|(i, p)| self.variance_standardized(w.row(i), self.prior_cov(p, p)))
            .collect()
    }

    /// Standardized predictive means at every row of `x`.
    pub fn means_standardized(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let w = self.interp(x)?;
        Ok(w.rows_iter().map(|r| self.mean_standardized(r)).collect())
    }

    /// Standardized `t × t` predictive covariance.
    pub fn covariance_standardized(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.interp(x)?;
        let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        let t = rows.len();
        let mut cov = DMatrix::zeros(t, t);
        for i in 0..t {
            for j in 0..t {
                cov[(i, j)] = self.covar_standardized(w.row(i), w.row(j), self.prior_cov(&rows[i], &rows[j]));
            }
        }
        Ok(cov)
    }

    /// Draws `s` posterior samples at the rows of `w_star` (data units),
    /// `μ + W* S v` with `v ~ N(0, I)` from a ChaCha generator seeded by `seed`.
    pub fn sample_posterior(&self, w_star: &InterpMatrix, s: usize, seed: u64) -> Result<DMatrix<f64>> {
        let root = self.require_sample_root()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DMatrix::from_fn(root.ncols(), s, |_, _| StandardNormal.sample(&mut rng));
        self.sample_with_noise(w_star, &v)
    }

    /// Deterministic form of [`Self::sample_posterior`] for given `k′ × s` noise.
    pub fn sample_with_noise(&self, w_star: &InterpMatrix, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let root = self.require_sample_root()?;
        check_dim("sampling noise rows", root.ncols(), v.nrows())?;
        check_dim("sampling interpolation columns", root.nrows(), w_star.ncols())?;
        let grid_draws = root * v;
        let mut out = DMatrix::zeros(w_star.nrows(), v.ncols());
        for (i, row) in w_star.rows_iter().enumerate() {
            let mu = self.mean_standardized(row);
            for c in 0..v.ncols() {
                let col = grid_draws.column(c);
                let z: f64 = row.0.iter().zip(row.1).map(|(&j, &wj)| wj * col[j]).sum();
                out[(i, c)] = self.standardization.value(mu + z);
            }
        }
        Ok(out)
    }

    fn require_sample_root(&self) -> Result<&DMatrix<f64>> {
        self.sample_root.as_ref().ok_or_else(|| {
            Error::InvalidParameter("sampling cache has not been built".into())
        })
    }
}
