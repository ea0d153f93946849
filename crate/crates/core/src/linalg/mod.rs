//! Dense and structured linear algebra used by the GP machinery.

pub mod dense;
mod fft;
pub mod interp;
pub mod toeplitz;
pub mod tridiag;

pub use dense::{dense_cholesky, DenseCholesky};
pub use interp::{interp_apply, interp_apply_transpose, InterpMatrix};
pub use toeplitz::{toeplitz_mvm, ToeplitzColumn};
pub use tridiag::{tridiag_cholesky, tridiag_solve, Bidiagonal, TriDiag};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
