use nalgebra::DMatrix;

use crate::error::{CliError, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(CliError::data(format!("metric inputs differ in length: {a} vs {b}")));
    }
    Ok(())
}

/// Population variance.
pub fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), reference.len())?;
    if pred.is_empty() {
        return Err(CliError::data("metric inputs are empty"));
    }
    Ok(pred.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean absolute error scaled by the variance of `y`.
pub fn smae(pred: &[f64], reference: &[f64], y: &[f64]) -> Result<f64> {
    let var = variance(y);
    if !(var > 0.0) {
        return Err(CliError::data("SMAE is undefined for targets with zero variance"));
    }
    Ok(mae(pred, reference)? / var)
}

/// `max |pred − ref| / |ref|`, skipping reference entries that are zero.
pub fn max_relative_error(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_lengths(pred.len(), reference.len())?;
    Ok(pred
        .iter()
        .zip(reference)
        .filter(|(_, r)| **r != 0.0)
        .map(|(p, r)| ((p - r) / r).abs())
        .fold(0.0, f64::max))
}

/// Unbiased sample covariance of the columns of a `t × s` draw matrix;
/// `None` when fewer than two draws are available.
pub fn sample_covariance(draws: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let s = draws.ncols();
    if s < 2 {
        return None;
    }
    let mean = draws.column_mean();
    let mut centered = draws.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    Some(&centered * centered.transpose() / (s - 1) as f64)
}

pub fn elementwise_mae(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(CliError::data(format!(
            "matrix shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    mae(a.as_slice(), b.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn smae_basics() {
        let y = [1.0, 2.0, 4.0, 7.0];
        let r = [0.3, 0.1, 0.7, 0.2];
        assert_eq!(smae(&r, &r, &y).unwrap(), 0.0);
        let var = variance(&y);
        let shifted: Vec<f64> = r.iter().map(|v| v + var).collect();
        assert!((smae(&shifted, &r, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!(smae(&r, &r, &[2.0; 4]).is_err());
        assert!(smae(&r, &r[..3], &y).is_err());
    }

    #[test]
    fn smae_matches_two_pass_reverse_sum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let n = rng.random_range(2..200);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let mut mean = 0.0;
            for v in y.iter().rev() {
                mean += v;
            }
            mean /= n as f64;
            let mut var = 0.0;
            let mut abs = 0.0;
            for i in (0..n).rev() {
                var += (y[i] - mean) * (y[i] - mean);
                abs += (p[i] - r[i]).abs();
            }
            let expected = (abs / n as f64) / (var / n as f64);
            assert!((smae(&p, &r, &y).unwrap() - expected).abs() < 1e-12 * expected.max(1.0));
        }
    }

    #[test]
    fn relative_error_and_covariance() {
        assert!((max_relative_error(&[1.1, 2.0, 5.0], &[1.0, 2.0, 0.0]).unwrap() - 0.1).abs() < 1e-12);
        let draws = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 2.0, -2.0]);
        let c = sample_covariance(&draws).unwrap();
        assert!((c[(0, 0)] - 4.0 / 3.0).abs() < 1e-12);
        assert!((c[(0, 1)] - 8.0 / 3.0).abs() < 1e-12);
        assert!(sample_covariance(&DMatrix::zeros(2, 1)).is_none());
        assert_eq!(elementwise_mae(&c, &c).unwrap(), 0.0);
    }
}
