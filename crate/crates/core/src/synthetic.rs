//! Seeded synthetic regression problems used by tests and benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::kernels::{build_grid, AdditiveKernel, AdditiveStructure, Kernel};

#[derive(Clone, Debug)]
pub struct Dataset {
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<f64>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    /// Smallest and largest value of input column `dim` over train and test.
    pub fn range(&self, dim: usize) -> (f64, f64) {
        self.train_x
            .column(dim)
            .iter()
            .chain(self.test_x.column(dim).iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

pub const SINE_DOMAIN: (f64, f64) = (-3.0, 3.0);

fn sine_target(x: f64) -> f64 {
    (2.0 * x).sin() + 0.5 * (5.0 * x).cos()
}

/// `y = sin 2x + ½ cos 5x + ε` with `x ~ U(-3, 3)` for `n` training and `t`
/// test points.
pub fn sine_1d(n: usize, t: usize, noise_std: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SINE_DOMAIN;
    let draw = |count: usize, rng: &mut ChaCha8Rng| {
        let x: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| {
                let e: f64 = rng.sample(StandardNormal);
                sine_target(xi) + noise_std * e
            })
            .collect();
        (DMatrix::from_column_slice(count, 1, &x), y)
    };
    let (train_x, train_y) = draw(n, &mut rng);
    let (test_x, test_y) = draw(t, &mut rng);
    Dataset {
        train_x,
        train_y,
        test_x,
        test_y,
    }
}

/// Single-component structure whose grid covers every train and test input.
pub fn structure_for(data: &Dataset, kernel: Box<dyn Kernel>, m: usize) -> Result<AdditiveStructure> {
    let (lo, hi) = data.range(0);
    AdditiveStructure::new(AdditiveKernel::single(kernel), vec![build_grid(lo, hi, m)?])
}
