//! Matrix-free conjugate gradients and Lanczos tridiagonalization.

mod cg;
mod lanczos;

pub use cg::{cg_solve, CgOptions, CgOutcome};
pub use lanczos::{
    lanczos, lanczos_solve_other, lanczos_solve_other_monitored, lanczos_solve_probe,
    LanczosFactors, MonitoredSolve, BREAKDOWN_TOL, REORTH_TOL,
};

use nalgebra::DMatrix;

/// A symmetric linear map available only through matrix-vector products.
pub trait MvmOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes `A v` into `out`. Both slices have length `dim()`.
    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }
}

impl MvmOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.column(j).iter()) {
                    *o += a * vj;
                }
            }
        }
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> MvmOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        (self.f)(v, out)
    }
}
