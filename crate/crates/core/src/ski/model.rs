use nalgebra::DMatrix;

use super::interp::build_w;
use crate::error::{check_dim, Error, Result};
use crate::kernels::{AdditiveStructure, PointKernel};
use crate::linalg::{InterpMatrix, ToeplitzColumn};
use crate::solvers::MvmOperator;

/// Mean/scale used to standardize training targets. Every cache lives in
/// standardized units; predictions are mapped back on output.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

impl Standardization {
    pub const IDENTITY: Self = Self { mean: 0.0, std: 1.0 };

    pub fn fit(y: &[f64]) -> Self {
        if y.is_empty() {
            return Self::IDENTITY;
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn value(&self, z: f64) -> f64 {
        self.mean + self.std * z
    }

    pub fn variance(&self, z: f64) -> f64 {
        self.std * self.std * z
    }
}

/// Block-diagonal `K_UU` over the additive components.
#[derive(Clone, Debug)]
pub struct BlockToeplitz {
    blocks: Vec<ToeplitzColumn>,
    offsets: Vec<usize>,
    total: usize,
}

impl BlockToeplitz {
    pub fn new(blocks: Vec<ToeplitzColumn>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut total = 0;
        for b in &blocks {
            offsets.push(total);
            total += b.len();
        }
        Self {
            blocks,
            offsets,
            total,
        }
    }

    pub fn from_structure(structure: &AdditiveStructure) -> Result<Self> {
        Ok(Self::new(structure.kuu_columns()?))
    }

    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn mvm_into(&self, v: &[f64], out: &mut [f64]) {
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let m = b.len();
            b.mvm_into(&v[off..off + m], &mut out[off..off + m]);
        }
    }

    pub fn mvm(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("K_UU mvm", self.total, v.len())?;
        let mut out = vec![0.0; self.total];
        self.mvm_into(v, &mut out);
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.total, self.total);
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let m = b.len();
            d.view_mut((off, off), (m, m)).copy_from(&b.to_dense());
        }
        d
    }
}

impl MvmOperator for BlockToeplitz {
    fn dim(&self) -> usize {
        self.total
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.mvm_into(v, out);
    }
}

/// KISS-GP model: additive structure, training interpolation weights and
/// noise, defining the operator `W K_UU Wᵀ + σ²I` (rows of `W` are training
/// points).
#[derive(Clone, Debug)]
pub struct SkiModel {
    structure: AdditiveStructure,
    kuu: BlockToeplitz,
    w_train: InterpMatrix,
    noise: f64,
    train_x: DMatrix<f64>,
    train_y: Vec<f64>,
    standardization: Standardization,
}

impl SkiModel {
    /// Standardizes `y` and interpolates `x` onto the structure's grids.
    pub fn new(
        structure: AdditiveStructure,
        train_x: DMatrix<f64>,
        y: &[f64],
        noise: f64,
    ) -> Result<Self> {
        let standardization = Standardization::fit(y);
        Self::with_standardization(structure, train_x, y, noise, standardization)
    }

    pub fn with_standardization(
        structure: AdditiveStructure,
        train_x: DMatrix<f64>,
        y: &[f64],
        noise: f64,
        standardization: Standardization,
    ) -> Result<Self> {
        check_dim("training targets", train_x.nrows(), y.len())?;
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise}"
            )));
        }
        if train_x.nrows() == 0 {
            return Err(Error::InvalidParameter("no training data".into()));
        }
        let w_train = build_w(&train_x, &structure)?;
        let kuu = BlockToeplitz::from_structure(&structure)?;
        Ok(Self {
            train_y: standardization.apply(y),
            structure,
            kuu,
            w_train,
            noise,
            train_x,
            standardization,
        })
    }

    pub fn structure(&self) -> &AdditiveStructure {
        &self.structure
    }

    pub fn kuu(&self) -> &BlockToeplitz {
        &self.kuu
    }

    pub fn w_train(&self) -> &InterpMatrix {
        &self.w_train
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn train_x(&self) -> &DMatrix<f64> {
        &self.train_x
    }

    /// Standardized training targets.
    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn m(&self) -> usize {
        self.kuu.dim()
    }

    /// Interpolation rows for arbitrary inputs on this model's grids.
    pub fn interp(&self, x: &DMatrix<f64>) -> Result<InterpMatrix> {
        build_w(x, &self.structure)
    }

    /// `K_UU Wᵀ v`.
    pub fn kuw_mvm(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.kuu.mvm(&self.w_train.apply_transpose(v)?)
    }

    pub fn operator(&self) -> SkiOperator<'_> {
        SkiOperator { model: self }
    }
}

/// `v ↦ (W K_UU Wᵀ + σ²I) v`.
#[derive(Clone, Copy)]
pub struct SkiOperator<'a> {
    model: &'a SkiModel,
}

impl MvmOperator for SkiOperator<'_> {
    fn dim(&self) -> usize {
        self.model.n()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let m = self.model;
        let wt = m.w_train.apply_transpose(v).expect("length checked by caller");
        let mut kw = vec![0.0; m.m()];
        m.kuu.mvm_into(&wt, &mut kw);
        for ((o, (idx, w)), &vi) in out.iter_mut().zip(m.w_train.rows_iter()).zip(v) {
            *o = idx.iter().zip(w).map(|(&j, &wj)| wj * kw[j]).sum::<f64>() + m.noise * vi;
        }
    }
}

pub fn ski_mvm(model: &SkiModel, v: &[f64]) -> Result<Vec<f64>> {
    check_dim("ski_mvm", model.n(), v.len())?;
    Ok(model.operator().apply(v))
}

/// The SKI kernel `k̃(x, x') = w_xᵀ K_UU w_x'` as a point kernel.
pub struct SkiKernel<'a> {
    structure: &'a AdditiveStructure,
    kuu: DMatrix<f64>,
}

impl<'a> SkiKernel<'a> {
    pub fn new(structure: &'a AdditiveStructure) -> Result<Self> {
        Ok(Self {
            structure,
            kuu: BlockToeplitz::from_structure(structure)?.to_dense(),
        })
    }
}

impl PointKernel for SkiKernel<'_> {
    fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let xa = DMatrix::from_row_slice(1, a.len(), a);
        let xb = DMatrix::from_row_slice(1, b.len(), b);
        let wa = build_w(&xa, self.structure).expect("point within grid range");
        let wb = build_w(&xb, self.structure).expect("point within grid range");
        let (ia, va) = wa.row(0);
        let (ib, vb) = wb.row(0);
        let mut s = 0.0;
        for (&p, &wp) in ia.iter().zip(va) {
            for (&q, &wq) in ib.iter().zip(vb) {
                s += wp * wq * self.kuu[(p, q)];
            }
        }
        s
    }
}
