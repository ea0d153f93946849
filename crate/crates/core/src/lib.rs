//! Gaussian-process regression with structured kernel interpolation (KISS-GP)
//! and Lanczos variance estimates (LOVE).
//!
//! The training operator `W K_UU Wᵀ + σ²I` is never formed: `K_UU` is a
//! Toeplitz matrix on a regular inducing grid and `W` holds four cubic
//! interpolation weights per point and additive component. A single
//! precomputation turns predictive means, variances and posterior samples
//! into operations whose cost does not depend on the number of training
//! points.

pub mod error;
pub mod exact;
pub mod kernels;
pub mod linalg;
pub mod ski;
pub mod solvers;
pub mod synthetic;
pub mod variance;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
