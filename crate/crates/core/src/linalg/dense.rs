use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

/// Relative jitter tried first, as a multiple of the mean diagonal.
pub const JITTER_START: f64 = 1e-8;
/// Number of ×10 escalations after the first jittered attempt.
pub const JITTER_ESCALATIONS: usize = 3;

/// Cholesky factor together with the diagonal jitter that was needed.
#[derive(Clone, Debug)]
pub struct DenseCholesky {
    chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

impl DenseCholesky {
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn l_ref(&self) -> &DMatrix<f64> {
        self.chol.l_dirty()
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `L⁻¹ B`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("Cholesky factor has a positive diagonal")
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }
}

/// Cholesky with the escalating jitter policy: plain first, then
/// `1e-8·mean(diag)` growing ×10 up to three times.
pub fn dense_cholesky(a: &DMatrix<f64>) -> Result<DenseCholesky> {
    check_dim("dense_cholesky", a.nrows(), a.ncols())?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(DenseCholesky { chol, jitter: 0.0 });
    }
    let n = a.nrows();
    let mean_diag = a.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    let mut jitter = JITTER_START * mean_diag;
    for _ in 0..=JITTER_ESCALATIONS {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            log::debug!("dense Cholesky succeeded with jitter {jitter:e}");
            return Ok(DenseCholesky { chol, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        pivot: 0,
        value: jitter / 10.0,
    })
}
