//! Assembly and direct solution of the stress–displacement–rotation system with
//! row-wise `H(div)` stresses and elementwise displacements and rotations.

mod dofmap;
mod manufactured;
mod norms;
mod system;

pub use dofmap::{build_dof_map, DofMap};
pub use manufactured::ManufacturedCase;
pub use norms::{error_norms, error_norms_with_degree, export_coefficients, export_samples, norm_degree, ErrorNorms};
pub use system::{
    assemble, assembly_degree, elem_field, elem_moments, row_piola, stress_moments, solve_saddle, solve_saddle_with, stress_field, BlockSaddleSystem,
    Solution,
};

use thiserror::Error;

use crate::interp::InterpError;
use crate::linalg::LinalgError;
use crate::polyspace::PolySpaceError;
use crate::quadrature::QuadratureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("order map is not admissible: {0}")]
    NonMonotoneOrder(String),
    #[error("factorization broke down: {0}")]
    FactorizationBreakdown(String),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    PolySpace(#[from] PolySpaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Solves the problem of a manufactured case.
pub fn solve_case(
    mesh: &crate::mesh::SimplicialMesh,
    orders: &crate::mesh::OrderMap,
    case: &ManufacturedCase,
) -> Result<(BlockSaddleSystem, Solution), AssemblyError> {
    let boundary: Option<&dyn crate::interp::Field> = if case.boundary_data { Some(&case.displacement) } else { None };
    let sys = assemble(mesh, orders, case.material, &case.load, boundary)?;
    let sol = solve_saddle(mesh, &sys)?;
    Ok((sys, sol))
}
