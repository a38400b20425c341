//! Polynomial spaces on the reference tetrahedron `T̂ = conv{0, e₁, e₂, e₃}`.
//!
//! Every space is represented by coefficient rows over a graded monomial frame (see
//! [`poly`]) and is `L²(T̂)`-orthonormal unless stated otherwise. Trace-constrained spaces
//! (ring and variable order) are null spaces of trace moments against hierarchical face and
//! edge bases.

pub mod face;
pub mod poly;
mod spaces;

pub use face::{
    dim_p1, dim_p2, edge_moment_basis, reference_edge, reference_face, trace, FaceFrame, FaceMomentBasis,
    FaceParam, SubSimplex, TraceKind, TracePoly, FACE_MAX_DEGREE, REF_VERTICES,
};
pub use poly::{eval_monomials, eval_monomials_with_grad, matrix_sandwich, num_monomials, PolyField};
pub use spaces::{
    basis_full, basis_ring, basis_variable, complement_g_basis, complement_g_rows, coordinates_in,
    curl_image_basis, curl_image_rows, differentiate, edge_trace_moments, face_trace_moments,
    scalar_orthonormal, DiffOp, PolyBasis, SpaceKind, SpaceTag, RANK_TOL, SPACE_MAX_DEGREE,
};

use thiserror::Error;

use crate::mesh::OrderSignature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolySpaceError {
    #[error("order signature {0:?} is not monotone")]
    NonMonotoneOrder(OrderSignature),
    #[error("degree {requested} exceeds the supported maximum {max}")]
    DegreeTooHigh { requested: u32, max: u32 },
    #[error("incompatible operand: {0}")]
    Incompatible(String),
}

/// Dimension of scalar `P_r` on a tetrahedron.
pub fn dim_p3(r: i64) -> usize {
    if r < 0 {
        0
    } else {
        num_monomials(r as u32)
    }
}

/// Number of independent row-wise curls of the ring Nédélec space of order `r + 1`,
/// matrix valued: `(2r + 5) r (r − 1) / 2`.
pub fn aux_count(r: u32) -> usize {
    let r = r as usize;
    (2 * r + 5) * r * r.saturating_sub(1) / 2
}
