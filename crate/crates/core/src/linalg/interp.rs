use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Sparse interpolation matrix with a fixed number of nonzeros per row.
///
/// Row `i` holds the weights that map inducing-grid values to the point
/// `x_i`, so `apply` interpolates grid values to points and
/// `apply_transpose` scatters point values back onto the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpMatrix {
    rows: usize,
    cols: usize,
    nnz_per_row: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl InterpMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        nnz_per_row: usize,
        indices: Vec<usize>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        check_dim("interpolation indices", rows * nnz_per_row, indices.len())?;
        check_dim("interpolation weights", rows * nnz_per_row, weights.len())?;
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::InvalidParameter(format!(
                "interpolation column {bad} out of range for {cols} columns"
            )));
        }
        Ok(Self {
            rows,
            cols,
            nnz_per_row,
            indices,
            weights,
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz_per_row(&self) -> usize {
        self.nnz_per_row
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let s = i * self.nnz_per_row;
        let e = s + self.nnz_per_row;
        (&self.indices[s..e], &self.weights[s..e])
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = (&[usize], &[f64])> + '_ {
        self.indices
            .chunks(self.nnz_per_row.max(1))
            .zip(self.weights.chunks(self.nnz_per_row.max(1)))
            .take(self.rows)
    }

    /// `W v` for a grid vector `v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("interp_apply", self.cols, v.len())?;
        Ok(self
            .rows_iter()
            .map(|(idx, w)| idx.iter().zip(w).map(|(&j, &wj)| wj * v[j]).sum())
            .collect())
    }

    /// `Wᵀ u` for a point vector `u`.
    pub fn apply_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim("interp_apply_transpose", self.rows, u.len())?;
        let mut out = vec![0.0; self.cols];
        for ((idx, w), &ui) in self.rows_iter().zip(u) {
            for (&j, &wj) in idx.iter().zip(w) {
                out[j] += wj * ui;
            }
        }
        Ok(out)
    }

    /// `W B` for a dense `cols × p` matrix.
    pub fn apply_dense(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim("interp_apply", self.cols, b.nrows())?;
        let mut out = DMatrix::zeros(self.rows, b.ncols());
        for c in 0..b.ncols() {
            let col = b.column(c);
            for (i, (idx, w)) in self.rows_iter().enumerate() {
                out[(i, c)] = idx.iter().zip(w).map(|(&j, &wj)| wj * col[j]).sum();
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for (i, (idx, w)) in self.rows_iter().enumerate() {
            for (&j, &wj) in idx.iter().zip(w) {
                d[(i, j)] += wj;
            }
        }
        d
    }
}

pub fn interp_apply(w: &InterpMatrix, v: &[f64]) -> Result<Vec<f64>> {
    w.apply(v)
}

pub fn interp_apply_transpose(w: &InterpMatrix, u: &[f64]) -> Result<Vec<f64>> {
    w.apply_transpose(u)
}
