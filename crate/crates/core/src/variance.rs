//! Interchangeable predictive-variance strategies, registered by name.
//!
//! Every strategy works in standardized units on the same [`SkiModel`], so
//! their outputs can be compared directly.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::exact::{ExactGp, DEFAULT_DENSE_LIMIT};
use crate::kernels::PointKernel;
use crate::ski::{DenseSki, LoveCache, LoveOptions, PriorTerm, SkiModel, DENSE_SKI_LIMIT};
use crate::solvers::{cg_solve, CgOptions};

/// Answers mean and variance queries after a strategy's precomputation.
pub trait PreparedVariance: Send + Sync {
    fn means(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>>;
    fn variances(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>>;

    /// Rank of a low-rank cache, if the strategy builds one.
    fn rank(&self) -> Option<usize> {
        None
    }

    /// Negative variances that were clamped to zero so far.
    fn clamped(&self) -> usize {
        0
    }
}

pub trait VarianceStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn prepare<'a>(&self, model: &'a SkiModel) -> Result<Box<dyn PreparedVariance + 'a>>;
}

fn prior_diag(kernel: &dyn PointKernel, x: &DMatrix<f64>) -> Vec<f64> {
    x.row_iter()
        .map(|r| {
            let p: Vec<f64> = r.iter().copied().collect();
            kernel.cov(&p, &p)
        })
        .collect()
}

/// Lanczos variance estimates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Love(pub LoveOptions);

impl PreparedVariance for LoveCache {
    fn means(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.means_standardized(x_star)
    }

    fn variances(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.variances_standardized(x_star)
    }

    fn rank(&self) -> Option<usize> {
        Some(LoveCache::rank(self))
    }

    fn clamped(&self) -> usize {
        self.clamped_count()
    }
}

impl VarianceStrategy for Love {
    fn name(&self) -> &'static str {
        "love"
    }

    fn prepare<'a>(&self, model: &'a SkiModel) -> Result<Box<dyn PreparedVariance + 'a>> {
        Ok(Box::new(LoveCache::precompute(model, self.0)?))
    }
}

/// Dense KISS-GP reference with the explicit `m × m` correction.
#[derive(Clone, Copy, Debug)]
pub struct SkiDense {
    pub dense_limit: usize,
}

impl Default for SkiDense {
    fn default() -> Self {
        Self {
            dense_limit: DENSE_SKI_LIMIT,
        }
    }
}

struct PreparedDense<'a> {
    model: &'a SkiModel,
    dense: DenseSki,
}

impl PreparedVariance for PreparedDense<'_> {
    fn means(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.dense.means_standardized(&self.model.interp(x_star)?))
    }

    fn variances(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        self.dense
            .variances_standardized(self.model, x_star, PriorTerm::Exact)
    }
}

impl VarianceStrategy for SkiDense {
    fn name(&self) -> &'static str {
        "ski-dense"
    }

    fn prepare<'a>(&self, model: &'a SkiModel) -> Result<Box<dyn PreparedVariance + 'a>> {
        Ok(Box::new(PreparedDense {
            model,
            dense: DenseSki::with_limit(model, self.dense_limit)?,
        }))
    }
}

/// One conjugate-gradient solve per query point, nothing cached.
#[derive(Clone, Copy, Debug)]
pub struct SkiCg(pub CgOptions);

impl Default for SkiCg {
    fn default() -> Self {
        Self(CgOptions {
            tol: 1e-8,
            max_iter: 2000,
        })
    }
}

struct PreparedCg<'a> {
    model: &'a SkiModel,
    opts: CgOptions,
}

impl PreparedVariance for PreparedCg<'_> {
    fn means(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        let w = self.model.interp(x_star)?;
        let op = self.model.operator();
        let sol = cg_solve(&op, self.model.train_y(), self.opts)?;
        let a = self.model.kuw_mvm(&sol.x)?;
        w.apply(&a)
    }

    fn variances(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        let w = self.model.interp(x_star)?;
        let prior = prior_diag(&self.model.structure().kernel, x_star);
        let op = self.model.operator();
        let mut e = vec![0.0; self.model.m()];
        let mut out = Vec::with_capacity(prior.len());
        for ((idx, wt), p) in w.rows_iter().zip(prior) {
            e.iter_mut().for_each(|v| *v = 0.0);
            for (&j, &wj) in idx.iter().zip(wt) {
                e[j] = wj;
            }
            let kw = self.model.kuu().mvm(&e)?;
            let b = self.model.w_train().apply(&kw)?;
            let z = cg_solve(&op, &b, self.opts)?.x;
            out.push(p - crate::linalg::dot(&b, &z));
        }
        Ok(out)
    }
}

impl VarianceStrategy for SkiCg {
    fn name(&self) -> &'static str {
        "ski-cg"
    }

    fn prepare<'a>(&self, model: &'a SkiModel) -> Result<Box<dyn PreparedVariance + 'a>> {
        Ok(Box::new(PreparedCg { model, opts: self.0 }))
    }
}

/// Exact GP with the model's kernel on the raw training inputs.
#[derive(Clone, Copy, Debug)]
pub struct Exact {
    pub dense_limit: usize,
}

impl Default for Exact {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

struct PreparedExact<'a>(ExactGp<'a>);

impl PreparedVariance for PreparedExact<'_> {
    fn means(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.0.means(x_star))
    }

    fn variances(&self, x_star: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.0.variances(x_star))
    }
}

impl VarianceStrategy for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn prepare<'a>(&self, model: &'a SkiModel) -> Result<Box<dyn PreparedVariance + 'a>> {
        Ok(Box::new(PreparedExact(ExactGp::fit_with_limit(
            model.train_x(),
            model.train_y(),
            &model.structure().kernel,
            model.noise(),
            self.dense_limit,
        )?)))
    }
}

pub struct VarianceRegistry {
    strategies: BTreeMap<&'static str, Box<dyn VarianceStrategy>>,
}

impl VarianceRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: BTreeMap::new(),
        }
    }

    /// `love`, `ski-dense`, `ski-cg` and `exact`.
    pub fn builtin(love: LoveOptions, dense_limit: usize) -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Love(love)));
        r.register(Box::new(SkiDense { dense_limit }));
        r.register(Box::new(SkiCg::default()));
        r.register(Box::new(Exact { dense_limit }));
        r
    }

    /// Adds or replaces a strategy under its own name.
    pub fn register(&mut self, s: Box<dyn VarianceStrategy>) {
        self.strategies.insert(s.name(), s);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn VarianceStrategy> {
        self.strategies
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: "variance strategy",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

impl Default for VarianceRegistry {
    fn default() -> Self {
        Self::builtin(LoveOptions::default(), DEFAULT_DENSE_LIMIT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::synthetic_model;
    use crate::synthetic::sine_1d;

    #[test]
    fn strategies_agree() {
        let model = synthetic_model(60, 32, 0.1, 3);
        let xs = sine_1d(60, 15, 0.1, 3).test_x;
        let reg = VarianceRegistry::builtin(LoveOptions {
            k: 60,
            k_sample: None,
            cg: CgOptions { tol: 1e-10, max_iter: 2000 },
        }, DEFAULT_DENSE_LIMIT);
        let reference = reg.get("ski-dense").unwrap().prepare(&model).unwrap();
        assert_eq!(reference.rank(), None);
        let rv = reference.variances(&xs).unwrap();
        let rm = reference.means(&xs).unwrap();
        for name in ["love", "ski-cg"] {
            let p = reg.get(name).unwrap().prepare(&model).unwrap();
            if name == "love" {
                assert!(p.rank().unwrap() <= 60);
            }
            for (a, b) in p.variances(&xs).unwrap().iter().zip(&rv) {
                assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
            }
            for (a, b) in p.means(&xs).unwrap().iter().zip(&rm) {
                assert!((a - b).abs() < 1e-5, "{name}: {a} vs {b}");
            }
        }
        let exact = reg.get("exact").unwrap().prepare(&model).unwrap();
        for (a, b) in exact.variances(&xs).unwrap().iter().zip(&rv) {
            assert!((a - b).abs() < 1e-2, "exact: {a} vs {b}");
        }
    }

    #[test]
    fn dense_limit_is_enforced() {
        let model = synthetic_model(40, 16, 0.1, 4);
        let reg = VarianceRegistry::builtin(LoveOptions::default(), 20);
        assert!(reg.get("exact").unwrap().prepare(&model).is_err());
        assert!(reg.get("ski-dense").unwrap().prepare(&model).is_err());
        assert!(reg.get("love").unwrap().prepare(&model).is_ok());
    }

    #[test]
    fn unknown_name_lists_available() {
        let reg = VarianceRegistry::default();
        match reg.get("nope") {
            Err(Error::UnknownStrategy { available, .. }) => {
                assert_eq!(available, "exact, love, ski-cg, ski-dense")
            }
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("lookup should fail"),
        }
    }
}
