use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularly spaced inducing points `u_i = start + i·spacing`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub start: f64,
    pub spacing: f64,
    pub count: usize,
}

impl Grid1D {
    pub const MIN_POINTS: usize = 4;

    pub fn new(start: f64, spacing: f64, count: usize) -> Result<Self> {
        let g = Self {
            start,
            spacing,
            count,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < Self::MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {} points, got {}",
                Self::MIN_POINTS,
                self.count
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite() && self.start.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid grid spacing {} / start {}",
                self.spacing, self.start
            )));
        }
        Ok(())
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.spacing
    }

    pub fn end(&self) -> f64 {
        self.point(self.count - 1)
    }

    /// Closed range of inputs whose four cubic-convolution neighbours are
    /// all on the grid.
    pub fn interpolable_range(&self) -> (f64, f64) {
        (self.point(1), self.point(self.count - 2))
    }
}

/// Grid of `m` points covering `[lo, hi]` with two spare cells on each side
/// (one for `m < 6`, where two would leave no interior).
pub fn build_grid(data_min: f64, data_max: f64, m: usize) -> Result<Grid1D> {
    if m < Grid1D::MIN_POINTS {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least {} points, got {m}",
            Grid1D::MIN_POINTS
        )));
    }
    if !(data_min.is_finite() && data_max.is_finite()) || data_max < data_min {
        return Err(Error::InvalidParameter(format!(
            "invalid data range [{data_min}, {data_max}]"
        )));
    }
    let (lo, hi) = if data_max == data_min {
        (data_min - 0.5, data_max + 0.5)
    } else {
        (data_min, data_max)
    };
    let margin = if m >= 6 { 2 } else { 1 };
    let spacing = (hi - lo) / (m - 1 - 2 * margin) as f64;
    Grid1D::new(lo - margin as f64 * spacing, spacing, m)
}
