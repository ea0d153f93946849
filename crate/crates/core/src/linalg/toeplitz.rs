//! Symmetric Toeplitz matrices stored by their first column.
//!
//! Products are computed by embedding the mirrored symbol
//! `[c_{m-1}, .., c_1, c_0, c_1, .., c_{m-1}]` in a circulant of power-of-two
//! size `N >= 2m - 1`. The embedded symbol is even, so its spectrum is real and
//! two real vectors can share one complex transform.

use nalgebra::DMatrix;

use super::fft::{Complex, Radix2};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug)]
pub struct ToeplitzColumn {
    col: Vec<f64>,
    plan: Radix2,
    spectrum: Vec<f64>,
}

impl ToeplitzColumn {
    pub fn new(col: Vec<f64>) -> Result<Self> {
        if col.is_empty() {
            return Err(Error::InvalidParameter(
                "Toeplitz column must have at least one entry".into(),
            ));
        }
        if col.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Toeplitz entry".into()));
        }
        let m = col.len();
        let len = (2 * m - 1).next_power_of_two();
        let plan = Radix2::new(len);
        let mut buf = vec![Complex::default(); len];
        buf[0].re = col[0];
        for j in 1..m {
            buf[j].re = col[j];
            buf[len - j].re = col[j];
        }
        plan.forward(&mut buf);
        let spectrum = buf.into_iter().map(|z| z.re).collect();
        Ok(Self {
            col,
            plan,
            spectrum,
        })
    }

    pub fn len(&self) -> usize {
        self.col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col.is_empty()
    }

    pub fn column(&self) -> &[f64] {
        &self.col
    }

    /// `T v` in O(m log m).
    pub fn mvm(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("toeplitz_mvm", self.len(), v.len())?;
        let mut out = vec![0.0; v.len()];
        self.convolve(v, None, &mut out, None);
        Ok(out)
    }

    /// Products with several vectors, two per transform.
    pub fn mvm_many(&self, vs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for v in vs {
            check_dim("toeplitz_mvm", self.len(), v.len())?;
        }
        let m = self.len();
        let mut outs: Vec<Vec<f64>> = vs.iter().map(|_| vec![0.0; m]).collect();
        let mut it = outs.iter_mut().zip(vs.iter());
        while let Some((o1, v1)) = it.next() {
            match it.next() {
                Some((o2, v2)) => self.convolve(v1, Some(v2), o1, Some(o2)),
                None => self.convolve(v1, None, o1, None),
            }
        }
        Ok(outs)
    }

    /// Writes `T v` into `out` without dimension checks beyond debug asserts.
    pub(crate) fn mvm_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.len());
        self.convolve(v, None, out, None);
    }

    fn convolve(&self, a: &[f64], b: Option<&[f64]>, out_a: &mut [f64], out_b: Option<&mut [f64]>) {
        let m = self.len();
        let mut buf = vec![Complex::default(); self.plan.len()];
        for i in 0..m {
            buf[i] = Complex::new(a[i], b.map_or(0.0, |b| b[i]));
        }
        self.plan.forward(&mut buf);
        for (z, &s) in buf.iter_mut().zip(&self.spectrum) {
            z.re *= s;
            z.im *= s;
        }
        self.plan.inverse(&mut buf);
        for i in 0..m {
            out_a[i] = buf[i].re;
        }
        if let Some(out_b) = out_b {
            for i in 0..m {
                out_b[i] = buf[i].im;
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| self.col[i.abs_diff(j)])
    }
}

/// Free-function form of [`ToeplitzColumn::mvm`].
pub fn toeplitz_mvm(col: &ToeplitzColumn, v: &[f64]) -> Result<Vec<f64>> {
    col.mvm(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(col: &[f64], v: &[f64]) -> Vec<f64> {
        let m = col.len();
        (0..m)
            .map(|i| (0..m).map(|j| col[i.abs_diff(j)] * v[j]).sum())
            .collect()
    }

    #[test]
    fn identity_column() {
        let t = ToeplitzColumn::new(vec![1.0, 0.0, 0.0]).unwrap();
        let y = t.mvm(&[3.0, 5.0, 7.0]).unwrap();
        for (a, b) in y.iter().zip([3.0, 5.0, 7.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_banded() {
        let t = ToeplitzColumn::new(vec![2.0, 1.0, 0.0]).unwrap();
        let y = t.mvm(&[1.0, 1.0, 1.0]).unwrap();
        for (a, b) in y.iter().zip([3.0, 4.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn eight_random_entries() {
        let col = [0.3, -1.2, 0.8, 2.5, -0.1, 0.05, 1.7, -0.9];
        let v = [1.1, -0.4, 0.9, 0.0, 3.2, -2.2, 0.6, 0.75];
        let t = ToeplitzColumn::new(col.to_vec()).unwrap();
        let y = t.mvm(&v).unwrap();
        for (a, b) in y.iter().zip(dense_mul(&col, &v)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_entry() {
        let t = ToeplitzColumn::new(vec![2.5]).unwrap();
        assert!((t.mvm(&[4.0]).unwrap()[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let t = ToeplitzColumn::new(vec![1.0, 0.5]).unwrap();
        assert!(matches!(t.mvm(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(ToeplitzColumn::new(vec![]).is_err());
    }

    #[test]
    fn paired_products_match_single() {
        let col: Vec<f64> = (0..13).map(|i| (-(i as f64) * 0.3).exp()).collect();
        let t = ToeplitzColumn::new(col).unwrap();
        let vs: Vec<Vec<f64>> = (0..5)
            .map(|k| (0..13).map(|i| ((i * (k + 1)) as f64).sin()).collect())
            .collect();
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        let many = t.mvm_many(&refs).unwrap();
        for (v, got) in vs.iter().zip(&many) {
            let single = t.mvm(v).unwrap();
            for (a, b) in single.iter().zip(got) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn col_and_vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..=64).prop_flat_map(|m| {
            (
                prop::collection::vec(-2.0f64..2.0, m),
                prop::collection::vec(-2.0f64..2.0, m),
                prop::collection::vec(-2.0f64..2.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn agrees_with_dense((col, u, _v) in col_and_vecs()) {
            let t = ToeplitzColumn::new(col.clone()).unwrap();
            let fast = t.mvm(&u).unwrap();
            let slow = dense_mul(&col, &u);
            let scale = slow.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
        }

        #[test]
        fn symmetric_form((col, u, v) in col_and_vecs()) {
            let t = ToeplitzColumn::new(col).unwrap();
            let tu = t.mvm(&u).unwrap();
            let tv = t.mvm(&v).unwrap();
            let lhs: f64 = v.iter().zip(&tu).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&tv).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }
}
