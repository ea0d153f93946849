use std::path::Path;

use lovegp::ski::Standardization;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

/// A train/test split with inputs and targets standardized by training
/// statistics.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub feature_names: Vec<String>,
    pub train_x: DMatrix<f64>,
    pub train_y: Vec<f64>,
    pub test_x: DMatrix<f64>,
    pub test_y: Vec<f64>,
    /// Per-feature transform applied to the inputs.
    pub x_standardization: Vec<Standardization>,
    /// Transform applied to the targets; invert it to report in data units.
    pub y_standardization: Standardization,
    /// Rows dropped for missing, non-numeric or non-finite cells.
    pub rejected_rows: usize,
}

impl LoadedData {
    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn t(&self) -> usize {
        self.test_x.nrows()
    }

    pub fn dims(&self) -> usize {
        self.train_x.ncols()
    }

    /// Range of input `dim` over both splits.
    pub fn range(&self, dim: usize) -> (f64, f64) {
        self.train_x
            .column(dim)
            .iter()
            .chain(self.test_x.column(dim).iter())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Standardizes features and targets with statistics of the given
    /// training rows.
    fn from_rows(
        feature_names: Vec<String>,
        rows: &[(Vec<f64>, f64)],
        train: &[usize],
        test: &[usize],
        rejected_rows: usize,
    ) -> Self {
        let d = feature_names.len();
        let x_standardization: Vec<Standardization> = (0..d)
            .map(|j| Standardization::fit(&train.iter().map(|&i| rows[i].0[j]).collect::<Vec<_>>()))
            .collect();
        let y_standardization =
            Standardization::fit(&train.iter().map(|&i| rows[i].1).collect::<Vec<_>>());
        let matrix = |idx: &[usize]| {
            DMatrix::from_fn(idx.len(), d, |r, j| {
                let s = x_standardization[j];
                (rows[idx[r]].0[j] - s.mean) / s.std
            })
        };
        let targets = |idx: &[usize]| {
            idx.iter()
                .map(|&i| (rows[i].1 - y_standardization.mean) / y_standardization.std)
                .collect()
        };
        Self {
            feature_names,
            train_x: matrix(train),
            train_y: targets(train),
            test_x: matrix(test),
            test_y: targets(test),
            x_standardization,
            y_standardization,
            rejected_rows,
        }
    }
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: bad header: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        rows.push(
            (0..headers.len())
                .map(|j| {
                    rec.get(j)
                        .and_then(|c| c.parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                })
                .collect(),
        );
    }
    Ok((headers, rows))
}

fn column_index(headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        CliError::config(format!(
            "column `{name}` not found (columns: {})",
            headers.join(", ")
        ))
    })
}

/// Rows with every selected cell numeric and finite, plus the reject count.
fn select_rows(
    rows: &[Vec<Option<f64>>],
    features: &[usize],
    target: usize,
) -> (Vec<(Vec<f64>, f64)>, usize) {
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        let x: Option<Vec<f64>> = features.iter().map(|&j| row[j]).collect();
        if let (Some(x), Some(y)) = (x, row[target]) {
            kept.push((x, y));
        }
    }
    let rejected = rows.len() - kept.len();
    (kept, rejected)
}

/// Reads a numeric CSV, drops unusable rows (reporting how many), and
/// splits it with a seeded shuffle.
pub fn load_dataset(
    path: &Path,
    target: &str,
    features: Option<&[String]>,
    train_fraction: f64,
    seed: u64,
) -> Result<LoadedData> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CliError::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let (headers, raw) = read_table(path)?;
    let target_idx = column_index(&headers, target)?;
    let feature_idx: Vec<usize> = match features {
        Some(names) => names
            .iter()
            .map(|n| column_index(&headers, n))
            .collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&j| j != target_idx).collect(),
    };
    if feature_idx.is_empty() {
        return Err(CliError::config("dataset has no feature columns"));
    }
    let (rows, rejected) = select_rows(&raw, &feature_idx, target_idx);
    if rejected > 0 {
        log::warn!("{}: rejected {rejected} rows with missing or non-numeric cells", path.display());
    }
    if rows.len() < 2 {
        return Err(CliError::data(format!(
            "{}: {} usable rows, need at least 2",
            path.display(),
            rows.len()
        )));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
    let names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    Ok(LoadedData::from_rows(
        names,
        &rows,
        &order[..n_train],
        &order[n_train..],
        rejected,
    ))
}

pub const AIRLINE_TRAIN: usize = 96;

/// Chronological split of the monthly airline series: month index as the
/// single input, passengers as the target.
pub fn load_airline(path: &Path) -> Result<LoadedData> {
    let (headers, raw) = read_table(path)?;
    let month = column_index(&headers, "month")?;
    let target = column_index(&headers, "passengers")?;
    let (rows, rejected) = select_rows(&raw, &[month], target);
    if rows.len() <= AIRLINE_TRAIN {
        return Err(CliError::data(format!(
            "airline series has {} usable rows, need more than {AIRLINE_TRAIN}",
            rows.len()
        )));
    }
    let idx: Vec<usize> = (0..rows.len()).collect();
    Ok(LoadedData::from_rows(
        vec!["month".into()],
        &rows,
        &idx[..AIRLINE_TRAIN],
        &idx[AIRLINE_TRAIN..],
        rejected,
    ))
}

/// The seeded 1-D sine problem. Inputs stay on their natural `[-3, 3]`
/// scale; targets are standardized like any other dataset.
pub fn synthetic(n: usize, t: usize, noise_std: f64, seed: u64) -> LoadedData {
    let d = lovegp::synthetic::sine_1d(n, t, noise_std, seed);
    let ys = Standardization::fit(&d.train_y);
    LoadedData {
        feature_names: vec!["x".into()],
        train_y: ys.apply(&d.train_y),
        test_y: ys.apply(&d.test_y),
        train_x: d.train_x,
        test_x: d.test_x,
        x_standardization: vec![Standardization::IDENTITY],
        y_standardization: ys,
        rejected_rows: 0,
    }
}
