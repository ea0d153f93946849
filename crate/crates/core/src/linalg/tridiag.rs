use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Symmetric tridiagonal matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriDiag {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

/// Lower bidiagonal Cholesky factor of a [`TriDiag`].
#[derive(Clone, Debug, PartialEq)]
pub struct Bidiagonal {
    pub diag: Vec<f64>,
    pub subdiag: Vec<f64>,
}

impl TriDiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidParameter("empty tridiagonal matrix".into()));
        }
        check_dim("tridiagonal off-diagonal", diag.len() - 1, offdiag.len())?;
        Ok(Self { diag, offdiag })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            diag: vec![1.0; k],
            offdiag: vec![0.0; k.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.dim();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = self.diag[i];
        }
        for (i, &b) in self.offdiag.iter().enumerate() {
            t[(i + 1, i)] = b;
            t[(i, i + 1)] = b;
        }
        t
    }

    pub fn with_jitter(&self, jitter: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|d| d + jitter).collect(),
            offdiag: self.offdiag.clone(),
        }
    }

    pub fn cholesky(&self) -> Result<Bidiagonal> {
        let k = self.dim();
        let mut diag = Vec::with_capacity(k);
        let mut subdiag = Vec::with_capacity(k.saturating_sub(1));
        let mut prev = 0.0;
        for i in 0..k {
            let mut pivot = self.diag[i];
            if i > 0 {
                let l = self.offdiag[i - 1] / prev;
                subdiag.push(l);
                pivot -= l * l;
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: pivot });
            }
            prev = pivot.sqrt();
            diag.push(prev);
        }
        Ok(Bidiagonal { diag, subdiag })
    }

    /// Solves `T X = B` column by column through the bidiagonal factor.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("tridiag_solve", self.dim(), b.nrows())?;
        let l = self.cholesky()?;
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            l.solve_in_place(col.as_mut_slice());
        }
        Ok(x)
    }
}

impl Bidiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        b[0] /= self.diag[0];
        for i in 1..b.len() {
            b[i] = (b[i] - self.subdiag[i - 1] * b[i - 1]) / self.diag[i];
        }
    }

    /// `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, b: &mut [f64]) {
        let k = b.len();
        b[k - 1] /= self.diag[k - 1];
        for i in (0..k - 1).rev() {
            b[i] = (b[i] - self.subdiag[i] * b[i + 1]) / self.diag[i];
        }
    }

    /// `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim());
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.dim();
        let mut l = DMatrix::zeros(k, k);
        for i in 0..k {
            l[(i, i)] = self.diag[i];
        }
        for (i, &s) in self.subdiag.iter().enumerate() {
            l[(i + 1, i)] = s;
        }
        l
    }
}

pub fn tridiag_cholesky(t: &TriDiag) -> Result<Bidiagonal> {
    t.cholesky()
}

pub fn tridiag_solve(t: &TriDiag, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    t.solve(b)
}
