//! Stationary covariance functions, the kernel registry, inducing grids and
//! additive compositions.

mod grid;
mod rbf;
mod registry;
mod spectral_mixture;

use std::fmt::Debug;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use grid::{build_grid, Grid1D};
pub use rbf::Rbf;
pub use registry::{KernelFactory, KernelRegistry, KernelSpec};
pub use spectral_mixture::{MixtureComponent, SpectralMixture};

use crate::error::{Error, Result};
use crate::linalg::ToeplitzColumn;

/// A one-dimensional stationary kernel `k(r)`, `r = |x - x'|`.
///
/// Hyperparameters are exposed as an unconstrained vector so optimizers can
/// work without bounds.
pub trait Kernel: Debug + Send + Sync {
    /// Registry name.
    fn name(&self) -> &'static str;

    fn eval(&self, r: f64) -> f64;

    fn variance(&self) -> f64 {
        self.eval(0.0)
    }

    fn unconstrained(&self) -> Vec<f64>;

    fn set_unconstrained(&mut self, theta: &[f64]) -> Result<()>;

    /// Hyperparameters as a JSON object, in natural units.
    fn params_json(&self) -> serde_json::Value;

    fn clone_box(&self) -> Box<dyn Kernel>;

    fn spec(&self) -> KernelSpec {
        KernelSpec {
            kind: self.name().to_string(),
            params: self.params_json(),
        }
    }
}

impl Clone for Box<dyn Kernel> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and positive, got {v}"
        )));
    }
    Ok(())
}

pub fn kernel_eval(kernel: &dyn Kernel, r: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite distance {r}")));
    }
    let k = kernel.eval(r);
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{} kernel produced non-finite value at r = {r}",
            kernel.name()
        )));
    }
    Ok(k)
}

/// First column of `K_UU` for a kernel on a regular grid.
pub fn kuu_first_column(kernel: &dyn Kernel, grid: &Grid1D) -> Result<ToeplitzColumn> {
    let col = (0..grid.count)
        .map(|i| kernel_eval(kernel, i as f64 * grid.spacing))
        .collect::<Result<Vec<_>>>()?;
    ToeplitzColumn::new(col)
}

/// Covariance between two points of a D-dimensional input space.
pub trait PointKernel: Sync {
    fn cov(&self, a: &[f64], b: &[f64]) -> f64;

    fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let ra: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
        let rb: Vec<Vec<f64>> = b.row_iter().map(|r| r.iter().copied().collect()).collect();
        DMatrix::from_fn(ra.len(), rb.len(), |i, j| self.cov(&ra[i], &rb[j]))
    }
}

/// One-dimensional kernel acting on a single input coordinate.
#[derive(Clone, Debug)]
pub struct KernelTerm {
    pub dim: usize,
    pub kernel: Box<dyn Kernel>,
}

/// Sum of one-dimensional kernels, each on its own coordinate.
#[derive(Clone, Debug)]
pub struct AdditiveKernel {
    pub terms: Vec<KernelTerm>,
}

impl AdditiveKernel {
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "additive kernel needs at least one term".into(),
            ));
        }
        Ok(Self { terms })
    }

    pub fn single(kernel: Box<dyn Kernel>) -> Self {
        Self {
            terms: vec![KernelTerm { dim: 0, kernel }],
        }
    }

    pub fn variance(&self) -> f64 {
        self.terms.iter().map(|t| t.kernel.variance()).sum()
    }

    pub fn unconstrained(&self) -> Vec<f64> {
        self.terms
            .iter()
            .flat_map(|t| t.kernel.unconstrained())
            .collect()
    }

    pub fn set_unconstrained(&mut self, theta: &[f64]) -> Result<()> {
        let mut offset = 0;
        for t in &mut self.terms {
            let len = t.kernel.unconstrained().len();
            let slice = theta.get(offset..offset + len).ok_or_else(|| {
                Error::InvalidParameter("hyperparameter vector too short".into())
            })?;
            t.kernel.set_unconstrained(slice)?;
            offset += len;
        }
        if offset != theta.len() {
            return Err(Error::InvalidParameter(
                "hyperparameter vector too long".into(),
            ));
        }
        Ok(())
    }

    pub fn max_dim(&self) -> usize {
        self.terms.iter().map(|t| t.dim).max().unwrap_or(0)
    }

    pub fn to_spec(&self) -> Vec<TermSpec> {
        self.terms
            .iter()
            .map(|t| TermSpec {
                dim: t.dim,
                kernel: t.kernel.spec(),
            })
            .collect()
    }

    pub fn from_spec(specs: &[TermSpec], registry: &KernelRegistry) -> Result<Self> {
        let terms = specs
            .iter()
            .map(|s| {
                Ok(KernelTerm {
                    dim: s.dim,
                    kernel: registry.build(&s.kernel)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms)
    }
}

impl PointKernel for AdditiveKernel {
    fn cov(&self, a: &[f64], b: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.kernel.eval((a[t.dim] - b[t.dim]).abs()))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    #[serde(default)]
    pub dim: usize,
    pub kernel: KernelSpec,
}

/// An additive kernel together with one inducing grid per term.
#[derive(Clone, Debug)]
pub struct AdditiveStructure {
    pub kernel: AdditiveKernel,
    pub grids: Vec<Grid1D>,
    offsets: Vec<usize>,
}

impl AdditiveStructure {
    pub fn new(kernel: AdditiveKernel, grids: Vec<Grid1D>) -> Result<Self> {
        crate::error::check_dim("additive structure grids", kernel.terms.len(), grids.len())?;
        let mut offsets = Vec::with_capacity(grids.len());
        let mut total = 0;
        for g in &grids {
            g.validate()?;
            offsets.push(total);
            total += g.count;
        }
        Ok(Self {
            kernel,
            grids,
            offsets,
        })
    }

    pub fn num_components(&self) -> usize {
        self.grids.len()
    }

    /// Column offset of component `c` in the block-stacked grid.
    pub fn offset(&self, c: usize) -> usize {
        self.offsets[c]
    }

    pub fn total_inducing(&self) -> usize {
        self.grids.iter().map(|g| g.count).sum()
    }

    pub fn kuu_columns(&self) -> Result<Vec<ToeplitzColumn>> {
        self.kernel
            .terms
            .iter()
            .zip(&self.grids)
            .map(|(t, g)| kuu_first_column(t.kernel.as_ref(), g))
            .collect()
    }

    pub fn to_spec(&self) -> StructureSpec {
        StructureSpec {
            terms: self.kernel.to_spec(),
            grids: self.grids.clone(),
        }
    }

    pub fn from_spec(spec: &StructureSpec, registry: &KernelRegistry) -> Result<Self> {
        Self::new(
            AdditiveKernel::from_spec(&spec.terms, registry)?,
            spec.grids.clone(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub terms: Vec<TermSpec>,
    pub grids: Vec<Grid1D>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_column_closed_form() {
        let k = Rbf::new(1.0, 1.0).unwrap();
        let g = Grid1D::new(0.0, 1.0, 3).unwrap_err();
        // m < 4 is not a valid grid; the column itself is still defined
        assert!(matches!(g, Error::InvalidParameter(_)));
        let grid = Grid1D {
            start: 0.0,
            spacing: 1.0,
            count: 3,
        };
        let col = kuu_first_column(&k, &grid).unwrap();
        let expected = [1.0, (-0.5f64).exp(), (-2.0f64).exp()];
        for (a, b) in col.column().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn single_point_column() {
        let k = Rbf::new(2.5, 0.3).unwrap();
        let grid = Grid1D {
            start: 1.0,
            spacing: 0.1,
            count: 1,
        };
        assert_eq!(kuu_first_column(&k, &grid).unwrap().column(), &[2.5]);
    }

    #[test]
    fn column_matches_pairwise() {
        let kernels: Vec<Box<dyn Kernel>> = vec![
            Box::new(Rbf::new(1.7, 0.45).unwrap()),
            Box::new(
                SpectralMixture::new(vec![
                    MixtureComponent::new(0.8, 0.3, 0.05),
                    MixtureComponent::new(0.4, 1.2, 0.2),
                ])
                .unwrap(),
            ),
        ];
        let grid = Grid1D::new(-0.7, 0.13, 16).unwrap();
        for k in &kernels {
            let col = kuu_first_column(k.as_ref(), &grid).unwrap();
            let dense = col.to_dense();
            for i in 0..16 {
                for j in 0..16 {
                    let direct = k.eval((grid.point(i) - grid.point(j)).abs());
                    assert!((dense[(i, j)] - direct).abs() < 1e-12);
                }
            }
            for i in 0..16 {
                assert_eq!(col.column()[i], k.eval(i as f64 * grid.spacing));
            }
        }
    }

    #[test]
    fn kernels_are_psd_on_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let m = rng.random_range(4..=64);
            let grid = Grid1D::new(0.0, rng.random_range(0.01..1.0), m).unwrap();
            let k: Box<dyn Kernel> = if trial % 2 == 0 {
                Box::new(Rbf::new(rng.random_range(0.1..3.0), rng.random_range(0.05..3.0)).unwrap())
            } else {
                let comps = (0..rng.random_range(1..4))
                    .map(|_| {
                        MixtureComponent::new(
                            rng.random_range(0.1..2.0),
                            rng.random_range(0.0..2.0),
                            rng.random_range(0.01..1.0),
                        )
                    })
                    .collect();
                Box::new(SpectralMixture::new(comps).unwrap())
            };
            let dense = kuu_first_column(k.as_ref(), &grid).unwrap().to_dense();
            let min_eig = dense.symmetric_eigen().eigenvalues.min();
            assert!(min_eig >= -1e-8 * m as f64, "trial {trial}: {min_eig}");
        }
    }

    #[test]
    fn additive_kernel_sums_terms() {
        let k = AdditiveKernel::new(vec![
            KernelTerm {
                dim: 0,
                kernel: Box::new(Rbf::new(1.0, 1.0).unwrap()),
            },
            KernelTerm {
                dim: 1,
                kernel: Box::new(Rbf::new(2.0, 0.5).unwrap()),
            },
        ])
        .unwrap();
        let c = k.cov(&[0.0, 0.0], &[1.0, 0.5]);
        let expected = (-0.5f64).exp() + 2.0 * (-0.5f64).exp();
        assert!((c - expected).abs() < 1e-14);
        assert_eq!(k.variance(), 3.0);
    }

    #[test]
    fn unconstrained_round_trip() {
        let mut k = AdditiveKernel::new(vec![
            KernelTerm {
                dim: 0,
                kernel: Box::new(Rbf::new(1.3, 0.7).unwrap()),
            },
            KernelTerm {
                dim: 0,
                kernel: Box::new(
                    SpectralMixture::new(vec![MixtureComponent::new(0.5, 0.25, 0.1)]).unwrap(),
                ),
            },
        ])
        .unwrap();
        let theta = k.unconstrained();
        assert_eq!(theta.len(), 5);
        let before = k.cov(&[0.3], &[1.1]);
        k.set_unconstrained(&theta).unwrap();
        assert!((k.cov(&[0.3], &[1.1]) - before).abs() < 1e-14);
        assert!(k.set_unconstrained(&theta[..4]).is_err());
    }

    #[test]
    fn spec_round_trip_through_registry() {
        let reg = KernelRegistry::builtin();
        let k = AdditiveKernel::single(Box::new(
            SpectralMixture::new(vec![
                MixtureComponent::new(0.5, 0.25, 0.1),
                MixtureComponent::new(1.5, 0.0, 0.3),
            ])
            .unwrap(),
        ));
        let json = serde_json::to_string(&k.to_spec()).unwrap();
        let specs: Vec<TermSpec> = serde_json::from_str(&json).unwrap();
        let back = AdditiveKernel::from_spec(&specs, &reg).unwrap();
        for r in [0.0, 0.3, 1.7] {
            assert_eq!(back.cov(&[0.0], &[r]), k.cov(&[0.0], &[r]));
        }
    }
}
