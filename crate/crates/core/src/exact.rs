//! Dense exact-GP reference: posterior moments, Cholesky sampling, the log
//! marginal likelihood and a small ADAM hyperparameter fitter.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{AdditiveKernel, PointKernel};
use crate::linalg::{dense_cholesky, DenseCholesky};

pub const DEFAULT_DENSE_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
pub struct ExactPosterior {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

impl ExactPosterior {
    pub fn variances(&self) -> Vec<f64> {
        self.cov.diagonal().iter().copied().collect()
    }
}

fn check_limit(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::InvalidParameter(format!(
            "exact GP limited to n <= {limit} training points (got {n}); raise the dense limit to override"
        )));
    }
    Ok(())
}

/// A conditioned exact GP that can answer repeated queries.
pub struct ExactGp<'k> {
    kernel: &'k dyn PointKernel,
    train_x: DMatrix<f64>,
    chol: Option<DenseCholesky>,
    alpha: DVector<f64>,
}

impl<'k> ExactGp<'k> {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], kernel: &'k dyn PointKernel, noise: f64) -> Result<Self> {
        Self::fit_with_limit(x, y, kernel, noise, DEFAULT_DENSE_LIMIT)
    }

    pub fn fit_with_limit(
        x: &DMatrix<f64>,
        y: &[f64],
        kernel: &'k dyn PointKernel,
        noise: f64,
        limit: usize,
    ) -> Result<Self> {
        check_dim("exact GP targets", x.nrows(), y.len())?;
        check_limit(x.nrows(), limit)?;
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter(format!("invalid noise variance {noise}")));
        }
        if x.nrows() == 0 {
            return Ok(Self {
                kernel,
                train_x: x.clone(),
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let mut k = kernel.gram(x, x);
        for i in 0..x.nrows() {
            k[(i, i)] += noise;
        }
        let chol = dense_cholesky(&k)?;
        let alpha = chol.solve_vec(&DVector::from_column_slice(y));
        Ok(Self {
            kernel,
            train_x: x.clone(),
            chol: Some(chol),
            alpha,
        })
    }

    pub fn means(&self, x_star: &DMatrix<f64>) -> Vec<f64> {
        if self.chol.is_none() {
            return vec![0.0; x_star.nrows()];
        }
        let ks = self.kernel.gram(x_star, &self.train_x);
        (ks * &self.alpha).iter().copied().collect()
    }

    /// `L⁻¹ K_{X X*}`.
    fn whitened_cross(&self, x_star: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.chol
            .as_ref()
            .map(|c| c.solve_lower(&self.kernel.gram(&self.train_x, x_star)))
    }

    /// Diagonal of the posterior covariance without forming it.
    pub fn variances(&self, x_star: &DMatrix<f64>) -> Vec<f64> {
        let rows: Vec<Vec<f64>> = x_star.row_iter().map(|r| r.iter().copied().collect()).collect();
        let prior: Vec<f64> = rows.iter().map(|p| self.kernel.cov(p, p)).collect();
        match self.whitened_cross(x_star) {
            None => prior,
            Some(v) => prior
                .iter()
                .zip(v.column_iter())
                .map(|(p, c)| p - c.norm_squared())
                .collect(),
        }
    }

    pub fn posterior(&self, x_star: &DMatrix<f64>) -> ExactPosterior {
        let prior = self.kernel.gram(x_star, x_star);
        let cov = match self.whitened_cross(x_star) {
            None => prior,
            Some(v) => {
                let c = prior - v.tr_mul(&v);
                (&c + c.transpose()) * 0.5
            }
        };
        ExactPosterior {
            mean: self.means(x_star),
            cov,
        }
    }
}

/// Posterior mean and covariance at `x_star` by dense Cholesky.
pub fn exact_posterior(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: &dyn PointKernel,
    noise: f64,
    x_star: &DMatrix<f64>,
) -> Result<ExactPosterior> {
    Ok(ExactGp::fit(x, y, kernel, noise)?.posterior(x_star))
}

/// `s` draws `μ + L v` with `L` the jittered Cholesky factor of the
/// posterior covariance; returns `t × s`.
pub fn exact_sample(p: &ExactPosterior, s: usize, seed: u64) -> Result<DMatrix<f64>> {
    let t = p.mean.len();
    check_dim("posterior covariance", t, p.cov.nrows())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DMatrix::from_fn(t, s, |_, _| StandardNormal.sample(&mut rng));
    let mut out = if p.cov.amax() == 0.0 {
        DMatrix::zeros(t, s)
    } else {
        dense_cholesky(&p.cov)?.l() * v
    };
    for mut col in out.column_iter_mut() {
        for (o, m) in col.iter_mut().zip(&p.mean) {
            *o += m;
        }
    }
    Ok(out)
}

/// `−½ yᵀ K̂⁻¹ y − ½ log|K̂| − (n/2) log 2π`, `K̂ = K + σ²I`.
pub fn log_marginal_likelihood(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: &dyn PointKernel,
    noise: f64,
) -> Result<f64> {
    lml_with_limit(x, y, kernel, noise, DEFAULT_DENSE_LIMIT)
}

fn lml_with_limit(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: &dyn PointKernel,
    noise: f64,
    limit: usize,
) -> Result<f64> {
    check_dim("marginal likelihood targets", x.nrows(), y.len())?;
    check_limit(x.nrows(), limit)?;
    let n = y.len();
    let mut k = kernel.gram(x, x);
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let chol = dense_cholesky(&k)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve_vec(&yv);
    Ok(-0.5 * yv.dot(&alpha) - 0.5 * chol.log_det() - 0.5 * n as f64 * (2.0 * PI).ln())
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub steps: usize,
    pub lr: f64,
    /// Central-difference step in unconstrained coordinates.
    pub fd_step: f64,
    /// Floor on the noise variance.
    pub min_noise: f64,
    pub dense_limit: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            steps: 200,
            lr: 0.1,
            fd_step: 1e-4,
            min_noise: 1e-6,
            dense_limit: DEFAULT_DENSE_LIMIT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub kernel: AdditiveKernel,
    pub noise: f64,
    pub log_likelihood: f64,
    /// Best objective seen after each step (index 0 is the initialization).
    pub best_history: Vec<f64>,
}

struct Objective<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    template: AdditiveKernel,
    min_noise: f64,
    limit: usize,
}

impl Objective<'_> {
    fn unpack(&self, theta: &[f64]) -> Result<(AdditiveKernel, f64)> {
        let (kp, noise) = theta.split_at(theta.len() - 1);
        let mut kernel = self.template.clone();
        kernel.set_unconstrained(kp)?;
        Ok((kernel, noise[0].exp().max(self.min_noise)))
    }

    fn eval(&self, theta: &[f64]) -> f64 {
        match self.unpack(theta) {
            Ok((k, noise)) => lml_with_limit(self.x, self.y, &k, noise, self.limit)
                .unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn gradient(&self, theta: &[f64], h: f64) -> Vec<f64> {
        let mut probe = theta.to_vec();
        (0..theta.len())
            .map(|i| {
                probe[i] = theta[i] + h;
                let up = self.eval(&probe);
                probe[i] = theta[i] - h;
                let down = self.eval(&probe);
                probe[i] = theta[i];
                let g = (up - down) / (2.0 * h);
                if g.is_finite() {
                    g
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Central finite-difference gradient of the log marginal likelihood with
/// respect to `[kernel unconstrained params.., log σ²]`.
pub fn fd_gradient(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel: &AdditiveKernel,
    noise: f64,
    step: f64,
) -> Vec<f64> {
    let obj = Objective {
        x,
        y,
        template: kernel.clone(),
        min_noise: 0.0,
        limit: DEFAULT_DENSE_LIMIT,
    };
    let mut theta = kernel.unconstrained();
    theta.push(noise.ln());
    obj.gradient(&theta, step)
}

/// ADAM ascent on the exact log marginal likelihood in unconstrained
/// coordinates, with finite-difference gradients. Returns the best
/// parameters observed.
pub fn fit_hyperparameters(
    x: &DMatrix<f64>,
    y: &[f64],
    kernel_init: &AdditiveKernel,
    noise_init: f64,
    opts: FitOptions,
) -> Result<FitResult> {
    check_dim("fit targets", x.nrows(), y.len())?;
    check_limit(x.nrows(), opts.dense_limit)?;
    if !(noise_init > 0.0) {
        return Err(Error::InvalidParameter("initial noise must be positive".into()));
    }
    let obj = Objective {
        x,
        y,
        template: kernel_init.clone(),
        min_noise: opts.min_noise,
        limit: opts.dense_limit,
    };
    let mut theta = kernel_init.unconstrained();
    theta.push(noise_init.ln());
    let f0 = obj.eval(&theta);
    if !f0.is_finite() {
        return Err(Error::Numerical(
            "log marginal likelihood is not finite at the initial hyperparameters".into(),
        ));
    }

    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m1 = vec![0.0; theta.len()];
    let mut m2 = vec![0.0; theta.len()];
    let mut best = (f0, theta.clone());
    let mut best_history = vec![f0];
    for step in 1..=opts.steps {
        let g = obj.gradient(&theta, opts.fd_step);
        let c1 = 1.0 - beta1.powi(step as i32);
        let c2 = 1.0 - beta2.powi(step as i32);
        for i in 0..theta.len() {
            m1[i] = beta1 * m1[i] + (1.0 - beta1) * g[i];
            m2[i] = beta2 * m2[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] += opts.lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + eps);
        }
        let f = obj.eval(&theta);
        if f > best.0 {
            best = (f, theta.clone());
        }
        best_history.push(best.0);
    }
    let (kernel, noise) = obj.unpack(&best.1)?;
    Ok(FitResult {
        kernel,
        noise,
        log_likelihood: best.0,
        best_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Rbf;
    use rand::Rng;

    fn rbf(s: f64, l: f64) -> AdditiveKernel {
        AdditiveKernel::single(Box::new(Rbf::new(s, l).unwrap()))
    }

    #[test]
    fn noise_free_interpolation() {
        let x = DMatrix::from_column_slice(6, 1, &[-1.0, -0.4, 0.1, 0.5, 1.2, 2.0]);
        let y = [0.3, -0.2, 0.8, 1.1, -0.5, 0.0];
        let k = rbf(1.0, 0.7);
        let p = exact_posterior(&x, &y, &k, 1e-12, &x).unwrap();
        let mae: f64 = p.mean.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / 6.0;
        assert!(mae < 1e-4, "{mae}");
        assert!(p.cov.diagonal().amax() < 1e-4);
    }

    #[test]
    fn no_data_is_prior() {
        let x = DMatrix::zeros(0, 1);
        let xs = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 2.0]);
        let k = rbf(1.5, 0.8);
        let p = exact_posterior(&x, &[], &k, 0.1, &xs).unwrap();
        assert_eq!(p.mean, vec![0.0; 3]);
        assert_eq!(p.cov, k.gram(&xs, &xs));
    }

    #[test]
    fn three_point_hand_computation() {
        // Scalar-arithmetic evaluation with an explicit 3x3 inverse.
        let xs = [0.0, 1.0, 2.5];
        let ys = [1.0, -0.5, 0.25];
        let noise = 0.1;
        let kf = |a: f64, b: f64| (-0.5 * (a - b) * (a - b)).exp();
        let mut kk = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                kk[i][j] = kf(xs[i], xs[j]) + if i == j { noise } else { 0.0 };
            }
        }
        let det = kk[0][0] * (kk[1][1] * kk[2][2] - kk[1][2] * kk[2][1])
            - kk[0][1] * (kk[1][0] * kk[2][2] - kk[1][2] * kk[2][0])
            + kk[0][2] * (kk[1][0] * kk[2][1] - kk[1][1] * kk[2][0]);
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = ([0, 1, 2].iter().filter(|&&r| r != j).copied().collect::<Vec<_>>()[0],
                                [0, 1, 2].iter().filter(|&&r| r != j).copied().collect::<Vec<_>>()[1]);
                let (c0, c1) = ([0, 1, 2].iter().filter(|&&c| c != i).copied().collect::<Vec<_>>()[0],
                                [0, 1, 2].iter().filter(|&&c| c != i).copied().collect::<Vec<_>>()[1]);
                let minor = kk[r0][c0] * kk[r1][c1] - kk[r0][c1] * kk[r1][c0];
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                inv[i][j] = sign * minor / det;
            }
        }
        let xstar = 1.7;
        let ks: Vec<f64> = xs.iter().map(|&x| kf(xstar, x)).collect();
        let mut mean = 0.0;
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                mean += ks[i] * inv[i][j] * ys[j];
                quad += ks[i] * inv[i][j] * ks[j];
            }
        }
        let var = 1.0 - quad;

        let x = DMatrix::from_column_slice(3, 1, &xs);
        let p = exact_posterior(&x, &ys, &rbf(1.0, 1.0), noise, &DMatrix::from_element(1, 1, xstar)).unwrap();
        assert!((p.mean[0] - mean).abs() < 1e-12);
        assert!((p.cov[(0, 0)] - var).abs() < 1e-12);
    }

    #[test]
    fn lml_single_point() {
        let x = DMatrix::from_element(1, 1, 0.0);
        let k = rbf(0.75, 1.0);
        let a = log_marginal_likelihood(&x, &[0.0], &k, 0.25).unwrap();
        assert!((a + 0.918_938_533_204_672_7).abs() < 1e-12);
        let b = log_marginal_likelihood(&x, &[1.0], &k, 0.25).unwrap();
        assert!((b + 1.418_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn lml_matches_naive_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(5, 1, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let k = rbf(1.3, 0.6);
        let mut kk = k.gram(&x, &x);
        for i in 0..5 {
            kk[(i, i)] += 0.2;
        }
        let yv = DVector::from_vec(y.clone());
        let inv = kk.clone().try_inverse().unwrap();
        let naive = -0.5 * yv.dot(&(inv * &yv)) - 0.5 * kk.determinant().ln() - 2.5 * (2.0 * PI).ln();
        let got = log_marginal_likelihood(&x, &y, &k, 0.2).unwrap();
        assert!((got - naive).abs() < 1e-8);
    }

    #[test]
    fn posterior_contracts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(40, 1, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs = DMatrix::from_fn(15, 1, |_, _| rng.random_range(-3.0..3.0));
        let k = rbf(2.0, 0.5);
        let p = exact_posterior(&x, &y, &k, 0.05, &xs).unwrap();
        for (v, pr) in p.variances().iter().zip(k.gram(&xs, &xs).diagonal().iter()) {
            assert!(*v <= pr + 1e-8);
        }
        let gp = ExactGp::fit(&x, &y, &k, 0.05).unwrap();
        for (a, b) in gp.variances(&xs).iter().zip(p.variances()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_degenerate_and_reproducible() {
        let p = ExactPosterior {
            mean: vec![1.0, -2.0],
            cov: DMatrix::zeros(2, 2),
        };
        let s = exact_sample(&p, 5, 1).unwrap();
        for c in s.column_iter() {
            assert_eq!(c.as_slice(), &[1.0, -2.0]);
        }
        let q = ExactPosterior {
            mean: vec![0.0, 0.0],
            cov: DMatrix::identity(2, 2),
        };
        assert_eq!(exact_sample(&q, 10, 7).unwrap(), exact_sample(&q, 10, 7).unwrap());
        assert_ne!(exact_sample(&q, 10, 7).unwrap(), exact_sample(&q, 10, 8).unwrap());
    }

    #[test]
    fn sample_covariance_identity() {
        let q = ExactPosterior {
            mean: vec![0.0, 0.0],
            cov: DMatrix::identity(2, 2),
        };
        let s = 100_000;
        let draws = exact_sample(&q, s, 11).unwrap();
        let cov = &draws * draws.transpose() / s as f64;
        // standard error of a sample (co)variance of unit normals
        let se_diag = (2.0 / s as f64).sqrt();
        let se_off = (1.0 / s as f64).sqrt();
        assert!((cov[(0, 0)] - 1.0).abs() < 3.0 * se_diag);
        assert!((cov[(1, 1)] - 1.0).abs() < 3.0 * se_diag);
        assert!(cov[(0, 1)].abs() < 3.0 * se_off);
    }

    #[test]
    fn zero_steps_returns_init() {
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.5, 1.0, 1.5]);
        let y = [0.1, 0.4, -0.3, 0.2];
        let k = rbf(1.2, 0.9);
        let fit = fit_hyperparameters(&x, &y, &k, 0.3, FitOptions { steps: 0, ..Default::default() }).unwrap();
        assert_eq!(fit.kernel.unconstrained(), k.unconstrained());
        assert!((fit.noise - 0.3).abs() < 1e-15);
        assert_eq!(fit.best_history.len(), 1);
    }

    #[test]
    fn nan_initialization_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let k = rbf(1.0, 1.0);
        assert!(fit_hyperparameters(&x, &[f64::NAN, 0.0], &k, 0.1, FitOptions::default()).is_err());
    }

    #[test]
    fn fd_gradient_self_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..5 {
            let x = DMatrix::from_fn(30, 1, |_, _| rng.random_range(-2.0..2.0));
            let y: Vec<f64> = (0..30).map(|i| (x[(i, 0)] * 2.0_f64).sin() + rng.random_range(-0.1..0.1)).collect();
            let k = rbf(rng.random_range(0.5..2.0), rng.random_range(0.3..1.5));
            let noise = rng.random_range(0.01..0.2);
            let g = fd_gradient(&x, &y, &k, noise, 1e-4);
            let h = fd_gradient(&x, &y, &k, noise, 5e-5);
            for (a, b) in g.iter().zip(&h) {
                assert!((a - b).abs() <= 0.05 * a.abs().max(1e-3), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn recovers_rbf_lengthscale() {
        // draw a GP sample with ℓ = 1, s² = 1, σ² = 0.01 and refit from ℓ = 0.3
        let n = 200;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-5.0..5.0));
        let truth = rbf(1.0, 1.0);
        let mut kk = truth.gram(&x, &x);
        for i in 0..n {
            kk[(i, i)] += 0.01;
        }
        let l = dense_cholesky(&kk).unwrap().l();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y: Vec<f64> = (l * z).iter().copied().collect();
        let fit = fit_hyperparameters(
            &x,
            &y,
            &rbf(0.5, 0.3),
            0.1,
            FitOptions { steps: 150, ..Default::default() },
        )
        .unwrap();
        let ell = fit.kernel.unconstrained()[1].exp();
        assert!((0.7..=1.3).contains(&ell), "lengthscale {ell}");
        assert!(fit.best_history.windows(2).all(|w| w[1] >= w[0]));
    }
}
