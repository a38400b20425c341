//! Numerical tolerances shared by every module.

use serde::{Deserialize, Serialize};

/// Highest polynomial order accepted on any tetrahedron.
pub const R_MAX: u32 = 4;

/// Tolerances with the library defaults. A single record keeps the knobs in one place;
/// `scaled` multiplies the check tolerances (not the algorithmic ones) uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative pivot threshold for dense LU.
    pub lu_pivot: f64,
    /// Relative rank threshold for QR-based rank decisions.
    pub rank: f64,
    /// Relative rank threshold for least squares.
    pub least_squares_rank: f64,
    /// Generalized eigen residual, relative to `‖x‖_B` and the pencil scale.
    pub eig_residual: f64,
    /// Iteration cap for the generalized eigensolver.
    pub eig_max_iter: usize,
    /// Relative algebraic residual accepted after a sparse solve.
    pub solve_residual: f64,
    /// Interface trace mismatch accepted by conformity checks.
    pub conformity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            lu_pivot: 1e-13,
            rank: 1e-10,
            least_squares_rank: 1e-10,
            eig_residual: 1e-8,
            eig_max_iter: 500,
            solve_residual: 1e-9,
            conformity: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            eig_residual: self.eig_residual * factor,
            solve_residual: self.solve_residual * factor,
            conformity: self.conformity * factor,
            ..*self
        }
    }
}
