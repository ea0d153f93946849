use super::MvmOperator;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Target relative residual `‖Ax − b‖ / ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Linear conjugate gradients for SPD `A`. Starts from zero and stops once
/// the recursively updated residual meets `opts.tol`; after `max_iter` the
/// last iterate is returned with `converged = false`.
pub fn cg_solve(a: &dyn MvmOperator, b: &[f64], opts: CgOptions) -> Result<CgOutcome> {
    let n = a.dim();
    check_dim("cg_solve", n, b.len())?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("CG tolerance must be positive".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite right-hand side".into()));
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }

    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut rel = 1.0;
    for it in 1..=opts.max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::Divergence { iteration: it });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::Divergence { iteration: it });
        }
        rel = rr_new.sqrt() / b_norm;
        if rel <= opts.tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                converged: true,
                relative_residual: rel,
            });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    log::warn!("CG hit max_iter = {} at relative residual {rel:e}", opts.max_iter);
    Ok(CgOutcome {
        x,
        iterations: opts.max_iter,
        converged: false,
        relative_residual: rel,
    })
}
