use nalgebra::DMatrix;

use super::MvmOperator;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm, TriDiag};

/// Relative size of `β_j` (against the running norm estimate) at which the
/// Krylov space is treated as invariant.
pub const BREAKDOWN_TOL: f64 = 1e-10;

/// `A ≈ Q T Qᵀ` from a partial Lanczos run.
#[derive(Clone, Debug)]
pub struct LanczosFactors {
    /// `n × k_effective`, orthonormal columns; the first is `probe / ‖probe‖`.
    pub q: DMatrix<f64>,
    pub t: TriDiag,
    pub requested: usize,
    /// `β_k`, the norm of the residual left after the last step.
    pub residual_norm: f64,
    /// Steps in which a reorthogonalization pass was needed.
    pub reorthogonalized: usize,
}

impl LanczosFactors {
    pub fn k_effective(&self) -> usize {
        self.t.dim()
    }

    pub fn broke_down(&self) -> bool {
        self.k_effective() < self.requested
    }
}

/// Overlap above which a new Lanczos vector is re-orthogonalized against the
/// whole basis. Loose triggers such as `√ε` let overlaps just below the
/// trigger accumulate past `1e-8`.
pub const REORTH_TOL: f64 = 1e-10;

/// One classical Gram-Schmidt pass if `w` has drifted out of the orthogonal
/// complement of `basis`. Returns whether a pass was applied.
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let wn = norm(w);
    if wn == 0.0 {
        return false;
    }
    let coeffs: Vec<f64> = basis.iter().map(|q| dot(w, q)).collect();
    let worst = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs())) / wn;
    if worst <= REORTH_TOL {
        return false;
    }
    for (q, c) in basis.iter().zip(&coeffs) {
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi -= c * qi;
        }
    }
    true
}

/// `k` steps of symmetric Lanczos with full reorthogonalization on
/// detected loss of orthogonality.
pub fn lanczos(a: &dyn MvmOperator, probe: &[f64], k: usize) -> Result<LanczosFactors> {
    let n = a.dim();
    check_dim("lanczos probe", n, probe.len())?;
    if k == 0 {
        return Err(Error::InvalidParameter("Lanczos needs k >= 1".into()));
    }
    let probe_norm = norm(probe);
    if probe_norm == 0.0 || !probe_norm.is_finite() {
        return Err(Error::InvalidParameter(
            "Lanczos probe vector must be nonzero and finite".into(),
        ));
    }
    let k = k.min(n);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    basis.push(probe.iter().map(|p| p / probe_norm).collect());
    let mut alphas = Vec::with_capacity(k);
    let mut betas: Vec<f64> = Vec::with_capacity(k);
    let mut max_alpha = 0.0f64;
    let mut max_beta = 0.0f64;
    let mut reorthogonalized = 0;
    let mut w = vec![0.0; n];
    let mut residual_norm = 0.0;

    for j in 0..k {
        a.apply_into(&basis[j], &mut w);
        let alpha = dot(&w, &basis[j]);
        if !alpha.is_finite() {
            return Err(Error::Numerical(format!("non-finite Lanczos coefficient at step {j}")));
        }
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * qi;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * qi;
            }
        }
        alphas.push(alpha);
        max_alpha = max_alpha.max(alpha.abs());

        if reorthogonalize(&mut w, &basis) {
            reorthogonalized += 1;
            reorthogonalize(&mut w, &basis);
        }

        let beta = norm(&w);
        residual_norm = beta;
        if j + 1 == k {
            break;
        }
        max_beta = max_beta.max(beta);
        let a_est = max_alpha + 2.0 * max_beta;
        if beta < BREAKDOWN_TOL * a_est {
            log::debug!("Lanczos breakdown at step {} (beta = {beta:e})", j + 1);
            break;
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }

    let k_eff = alphas.len();
    betas.truncate(k_eff - 1);
    let q = DMatrix::from_fn(n, k_eff, |i, j| basis[j][i]);
    Ok(LanczosFactors {
        q,
        t: TriDiag::new(alphas, betas)?,
        requested: k,
        residual_norm,
        reorthogonalized,
    })
}

/// `‖b‖ Q T⁻¹ e₁`, the Lanczos approximation of `A⁻¹ b` for the probe `b`.
pub fn lanczos_solve_probe(f: &LanczosFactors, b_norm: f64) -> Result<Vec<f64>> {
    let k = f.k_effective();
    let mut e1 = DMatrix::zeros(k, 1);
    e1[(0, 0)] = b_norm;
    let y = f.t.solve(&e1)?;
    Ok((&f.q * y).column(0).iter().copied().collect())
}

/// `Q T⁻¹ Qᵀ B` for right-hand sides other than the probe.
pub fn lanczos_solve_other(f: &LanczosFactors, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("lanczos_solve_other", f.q.nrows(), b.nrows())?;
    let proj = f.q.tr_mul(b);
    let y = f.t.solve(&proj)?;
    Ok(&f.q * y)
}

#[derive(Clone, Debug)]
pub struct MonitoredSolve {
    pub x: DMatrix<f64>,
    /// `‖b′ − A x̂‖ / ‖b′‖` per column.
    pub relative_residuals: Vec<f64>,
}

impl MonitoredSolve {
    pub fn worst_residual(&self) -> f64 {
        self.relative_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// [`lanczos_solve_other`] plus a residual check against the operator, which
/// exposes right-hand sides poorly represented in the probe's Krylov space.
pub fn lanczos_solve_other_monitored(
    f: &LanczosFactors,
    a: &dyn MvmOperator,
    b: &DMatrix<f64>,
) -> Result<MonitoredSolve> {
    let x = lanczos_solve_other(f, b)?;
    let relative_residuals = (0..b.ncols())
        .map(|c| {
            let xc: Vec<f64> = x.column(c).iter().copied().collect();
            let ax = a.apply(&xc);
            let bc = b.column(c);
            let bn = bc.norm();
            let rn = ax
                .iter()
                .zip(bc.iter())
                .map(|(p, q)| (q - p).powi(2))
                .sum::<f64>()
                .sqrt();
            if bn == 0.0 {
                rn
            } else {
                rn / bn
            }
        })
        .collect();
    Ok(MonitoredSolve {
        x,
        relative_residuals,
    })
}
