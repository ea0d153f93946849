//! Dense KISS-GP reference: forms `C = K_UU Wᵀ (W K_UU Wᵀ + σ²I)⁻¹ W K_UU`
//! explicitly. Quadratic in `m` and cubic in `n`; only for verification.

use nalgebra::{DMatrix, DVector};

use super::model::SkiModel;
use crate::error::{Error, Result};
use crate::kernels::PointKernel;
use crate::linalg::{dense_cholesky, InterpMatrix};

/// Largest `n` or `m` the dense reference accepts by default.
pub const DENSE_SKI_LIMIT: usize = 4096;

/// Which prior term enters the predictive covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriorTerm {
    /// `k(x_i, x_j)` from the kernel itself.
    Exact,
    /// The interpolated prior `w_iᵀ K_UU w_j`.
    Interpolated,
}

#[derive(Clone, Debug)]
pub struct DenseSki {
    kuu: DMatrix<f64>,
    c: DMatrix<f64>,
    mean_cache: DVector<f64>,
}

impl DenseSki {
    pub fn new(model: &SkiModel) -> Result<Self> {
        Self::with_limit(model, DENSE_SKI_LIMIT)
    }

    pub fn with_limit(model: &SkiModel, limit: usize) -> Result<Self> {
        if model.n() > limit || model.m() > limit {
            return Err(Error::InvalidParameter(format!(
                "dense KISS-GP reference limited to n, m <= {limit} (n = {}, m = {})",
                model.n(),
                model.m()
            )));
        }
        let w = model.w_train().to_dense();
        let kuu = model.kuu().to_dense();
        let kw = &kuu * w.transpose();
        let mut a = &w * &kw;
        for i in 0..model.n() {
            a[(i, i)] += model.noise();
        }
        let chol = dense_cholesky(&a)?;
        let solved = chol.solve(&kw.transpose());
        let c = &kw * solved;
        let c = (&c + c.transpose()) * 0.5;
        let alpha = chol.solve_vec(&DVector::from_column_slice(model.train_y()));
        let mean_cache = &kw * alpha;
        Ok(Self { kuu, c, mean_cache })
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn kuu(&self) -> &DMatrix<f64> {
        &self.kuu
    }

    /// `K_UU − C`, the posterior covariance of the grid values.
    pub fn grid_posterior(&self) -> DMatrix<f64> {
        &self.kuu - &self.c
    }

    pub fn mean_cache(&self) -> &DVector<f64> {
        &self.mean_cache
    }

    pub fn means_standardized(&self, w_star: &InterpMatrix) -> Vec<f64> {
        w_star
            .rows_iter()
            .map(|(idx, w)| idx.iter().zip(w).map(|(&j, &wj)| wj * self.mean_cache[j]).sum())
            .collect()
    }

    /// `prior − w_iᵀ C w_i` for each row.
    pub fn variances_standardized(
        &self,
        model: &SkiModel,
        x_star: &DMatrix<f64>,
        prior: PriorTerm,
    ) -> Result<Vec<f64>> {
        let w = model.interp(x_star)?;
        let rows: Vec<Vec<f64>> = x_star.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(rows
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (idx, wt) = w.row(i);
                let mut quad = 0.0;
                let mut prior_ski = 0.0;
                for (&a, &wa) in idx.iter().zip(wt) {
                    for (&b, &wb) in idx.iter().zip(wt) {
                        quad += wa * wb * self.c[(a, b)];
                        prior_ski += wa * wb * self.kuu[(a, b)];
                    }
                }
                let k0 = match prior {
                    PriorTerm::Exact => model.structure().kernel.cov(p, p),
                    PriorTerm::Interpolated => prior_ski,
                };
                k0 - quad
            })
            .collect())
    }

    /// Full `t × t` predictive covariance.
    pub fn covariance_standardized(
        &self,
        model: &SkiModel,
        x_star: &DMatrix<f64>,
        prior: PriorTerm,
    ) -> Result<DMatrix<f64>> {
        let w = model.interp(x_star)?.to_dense();
        let prior_m = match prior {
            PriorTerm::Exact => model.structure().kernel.gram(x_star, x_star),
            PriorTerm::Interpolated => &w * &self.kuu * w.transpose(),
        };
        Ok(prior_m - &w * &self.c * w.transpose())
    }
}
