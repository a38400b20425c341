//! Dense and sparse linear algebra used throughout the crate.

mod dense;
mod eigen;
mod lu;
mod qr;
mod sparse;

pub use dense::{dot, norm2, norm_inf, DenseMatrix};
pub use eigen::{
    cholesky, pencil_residual, sym_eigen, sym_generalized_eig_min, sym_generalized_eig_min_dense,
    sym_generalized_eigen_dense,
    EigenPair,
};
pub use lu::{det_sign_and_logmag, lu_solve, row_equilibrated_logdet, LuFactor};
pub use qr::{least_squares, null_space, numerical_rank, range_space, QrFactor};
pub use sparse::{sparse_solve, SparseLu, SparseMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (weak pivot at step {pivot})")]
    SingularMatrix { pivot: usize },
    #[error("matrix has numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry ({row}, {col}) out of range")]
    IndexOutOfRange { row: usize, col: usize },
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("sparse factorization failed: {0}")]
    Factorization(String),
}
