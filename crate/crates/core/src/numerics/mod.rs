//! Shared numeric kernels.

mod eigen;
mod entropy;
mod gram_schmidt;
mod laplace;
mod matrix;

pub use eigen::{
    inv_sqrt_sym, orthonormalize_rows, symmetric_eigen, SymmetricEigen, EIGENVALUE_FLOOR, SYMMETRY_TOLERANCE,
};
pub use entropy::{conditional_entropy, discrete_entropy};
pub use gram_schmidt::{gram_schmidt_complete, OrthMatrix, SKIP_TOLERANCE};
pub use laplace::{sample_laplace, Laplace};
pub use matrix::{cholesky_solve, DenseMatrix};
