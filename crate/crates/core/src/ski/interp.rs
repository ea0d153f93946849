use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{AdditiveStructure, Grid1D};
use crate::linalg::InterpMatrix;

/// Keys cubic convolution kernel with `a = -1/2`.
fn keys(s: f64) -> f64 {
    let s = s.abs();
    if s <= 1.0 {
        (1.5 * s - 2.5) * s * s + 1.0
    } else if s < 2.0 {
        ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0
    } else {
        0.0
    }
}

/// Cubic convolution weights of `x` on grid nodes `j-1 ..= j+2`,
/// `j = floor((x - start) / h)`.
pub fn interp_weights(x: f64, grid: &Grid1D) -> Result<([usize; 4], [f64; 4])> {
    let (lo, hi) = grid.interpolable_range();
    // tolerate round-off from the grid construction at the two ends
    let slack = 1e-9 * grid.spacing;
    if !x.is_finite() || x < lo - slack || x > hi + slack {
        return Err(Error::OutOfRange {
            value: x,
            lo,
            hi,
            context: String::new(),
        });
    }
    let pos = ((x - grid.start) / grid.spacing).clamp(1.0, (grid.count - 2) as f64);
    let j = (pos.floor() as usize).min(grid.count - 3);
    let t = pos - j as f64;
    Ok((
        [j - 1, j, j + 1, j + 2],
        [keys(1.0 + t), keys(t), keys(1.0 - t), keys(2.0 - t)],
    ))
}

/// Block-stacked interpolation matrix: each row carries four weights per
/// additive component, offset into that component's grid columns.
pub fn build_w(x: &DMatrix<f64>, structure: &AdditiveStructure) -> Result<InterpMatrix> {
    let d = structure.num_components();
    let n = x.nrows();
    if let Some(bad) = structure.kernel.terms.iter().find(|t| t.dim >= x.ncols()) {
        return Err(Error::InvalidParameter(format!(
            "kernel term uses input column {} but data has {} columns",
            bad.dim,
            x.ncols()
        )));
    }
    let mut indices = Vec::with_capacity(n * 4 * d);
    let mut weights = Vec::with_capacity(n * 4 * d);
    for i in 0..n {
        for (c, (term, grid)) in structure
            .kernel
            .terms
            .iter()
            .zip(&structure.grids)
            .enumerate()
        {
            let (idx, w) = interp_weights(x[(i, term.dim)], grid).map_err(|e| match e {
                Error::OutOfRange { value, lo, hi, .. } => Error::OutOfRange {
                    value,
                    lo,
                    hi,
                    context: format!(" (row {i}, component {c})"),
                },
                other => other,
            })?;
            let off = structure.offset(c);
            indices.extend(idx.iter().map(|j| j + off));
            weights.extend(w);
        }
    }
    InterpMatrix::new(n, structure.total_inducing(), 4 * d, indices, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{AdditiveKernel, KernelTerm, Rbf};
    use rand::{Rng, SeedableRng};

    fn grid() -> Grid1D {
        Grid1D::new(-1.0, 0.25, 12).unwrap()
    }

    #[test]
    fn on_node() {
        let g = grid();
        let (idx, w) = interp_weights(g.point(5), &g).unwrap();
        assert_eq!(idx, [4, 5, 6, 7]);
        assert_eq!(w, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn midpoint() {
        let g = grid();
        let (idx, w) = interp_weights(g.point(5) + 0.125, &g).unwrap();
        assert_eq!(idx, [4, 5, 6, 7]);
        let expected = [-0.0625, 0.5625, 0.5625, -0.0625];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn range_ends() {
        let g = grid();
        let (idx, w) = interp_weights(g.point(10), &g).unwrap();
        assert_eq!(idx, [8, 9, 10, 11]);
        assert_eq!(w, [0.0, 0.0, 1.0, 0.0]);
        let (idx, _) = interp_weights(g.point(1), &g).unwrap();
        assert_eq!(idx, [0, 1, 2, 3]);
        assert!(matches!(
            interp_weights(g.point(0) + 0.01, &g),
            Err(Error::OutOfRange { .. })
        ));
        assert!(interp_weights(g.point(11), &g).is_err());
        assert!(interp_weights(f64::NAN, &g).is_err());
    }

    #[test]
    fn partition_of_unity_and_reproduces_lines() {
        let g = grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (lo, hi) = g.interpolable_range();
        for _ in 0..1000 {
            let x = rng.random_range(lo..=hi);
            let (idx, w) = interp_weights(x, &g).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let lin: f64 = idx.iter().zip(&w).map(|(&j, wj)| wj * g.point(j)).sum();
            assert!((lin - x).abs() < 1e-12);
        }
    }

    fn two_component_structure() -> AdditiveStructure {
        let kernel = AdditiveKernel::new(vec![
            KernelTerm {
                dim: 0,
                kernel: Box::new(Rbf::new(1.0, 1.0).unwrap()),
            },
            KernelTerm {
                dim: 1,
                kernel: Box::new(Rbf::new(1.0, 0.5).unwrap()),
            },
        ])
        .unwrap();
        AdditiveStructure::new(
            kernel,
            vec![
                Grid1D::new(-1.0, 0.25, 12).unwrap(),
                Grid1D::new(0.0, 0.5, 8).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_component_rows() {
        let g = grid();
        let s = AdditiveStructure::new(
            AdditiveKernel::single(Box::new(Rbf::new(1.0, 1.0).unwrap())),
            vec![g],
        )
        .unwrap();
        let x = DMatrix::from_column_slice(3, 1, &[-0.6, 0.1, 1.3]);
        let w = build_w(&x, &s).unwrap();
        for i in 0..3 {
            let (idx, wt) = interp_weights(x[(i, 0)], &g).unwrap();
            assert_eq!(w.row(i), (&idx[..], &wt[..]));
        }
    }

    #[test]
    fn on_node_in_both_dims() {
        let s = two_component_structure();
        let x = DMatrix::from_row_slice(1, 2, &[0.0, 1.5]);
        let dense = build_w(&x, &s).unwrap().to_dense();
        let nonzero: Vec<(usize, f64)> = dense
            .row(0)
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(j, &v)| (j, v))
            .collect();
        assert_eq!(nonzero, vec![(4, 1.0), (12 + 3, 1.0)]);
    }

    #[test]
    fn blocks_match_per_component() {
        let s = two_component_structure();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(25, 2, |_, c| {
            if c == 0 {
                rng.random_range(-0.75..1.5)
            } else {
                rng.random_range(0.5..2.5)
            }
        });
        let dense = build_w(&x, &s).unwrap().to_dense();
        for (c, g) in s.grids.iter().enumerate() {
            let single = AdditiveStructure::new(
                AdditiveKernel::single(Box::new(Rbf::new(1.0, 1.0).unwrap())),
                vec![*g],
            )
            .unwrap();
            let xc = DMatrix::from_column_slice(25, 1, x.column(c).as_slice());
            let block = build_w(&xc, &single).unwrap().to_dense();
            let off = s.offset(c);
            assert_eq!(dense.columns(off, g.count), block);
        }
    }

    #[test]
    fn out_of_range_reports_row() {
        let s = two_component_structure();
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 40.0]);
        let err = build_w(&x, &s).unwrap_err().to_string();
        assert!(err.contains("row 1") && err.contains("component 1"), "{err}");
    }
}
