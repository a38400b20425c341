//! Projection and interpolation operators: the elementwise `L²` projection, a commuting
//! interpolant onto full-order stress spaces, the two trimmed projections with their moment
//! systems, the Clément quasi-interpolant and the stabilised trimmed projection.

mod field;
pub mod moments;
mod operators;
mod stress;

pub use field::{DiscreteField, Difference, Field, FieldKind, FnField, GlobalPoly, RowDivergence, S1Applied};
pub use moments::{
    moment_system, s1_matrix, select_t, t_score, target_space, MomentSystem, Projector, RefQuadrature,
    RefSamples, MOMENT_QUAD_DEGREE, T_GRID,
};
pub use operators::{
    clement, conformity_defect, elementwise_to_global, interp_p1minus, interp_p1minus_element,
    interp_p1minus_stabilized, interp_p2, interp_p2minus, interp_p2minus_element, interp_physical,
    project_l2_p3, pull_back, OnTet,
};
pub use stress::{StressElement, StressLocal};

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::mesh::OrderSignature;
use crate::polyspace::PolySpaceError;
use crate::quadrature::QuadratureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("moment system of {projector:?} is singular for {orders:?}")]
    SingularMomentSystem { projector: Projector, orders: OrderSignature },
    #[error("no grid value of t gives nonsingular moment systems for r = {r}")]
    NoAdmissibleT { r: u32 },
    #[error("trace jump {jump:e} across face {face}")]
    ConformityViolation { face: usize, jump: f64 },
    #[error("moment system has {rows} rows but {cols} unknowns")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error(transparent)]
    PolySpace(#[from] PolySpaceError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Moment system of the Λ² trimmed projection at an explicit `t`.
pub fn build_moment_system_2minus(orders: OrderSignature, t: f64) -> Result<MomentSystem, InterpError> {
    MomentSystem::build(Projector::TwoMinus, orders, t)
}

/// Moment system of the Λ¹ trimmed projection at an explicit `t`.
pub fn build_moment_system_1minus(orders: OrderSignature, t: f64) -> Result<MomentSystem, InterpError> {
    MomentSystem::build(Projector::OneMinus, orders, t)
}
