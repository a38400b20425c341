//! Numerical checks of the discrete stability conditions, the commuting diagrams and the
//! quasi-optimal error bound, over refinement levels and order policies.

mod brezzi;
mod convergence;
mod diagrams;
mod report;

pub use brezzi::{
    construction_of_system, infsup_constant, infsup_of_system, kernel_coercivity, kernel_coercivity_of_system,
    stability_construction_check, Construction, InfSup, KernelCoercivity,
};
pub use convergence::{convergence_study, refinement_levels};
pub use diagrams::{commuting_diagram_suite, l2_distance, DiagramResiduals};
pub use report::{drift, stability_study, ConvergenceReport, ConvergenceRow, StabilityReport, StabilityRow, StudyOptions, REPORT_SCHEMA};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::interp::InterpError;
use crate::linalg::LinalgError;
use crate::mesh::{MeshError, OrderMap, SimplicialMesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("discrete kernel is empty")]
    EmptyKernel,
    #[error("constraints are infeasible (relative residual {residual:e})")]
    InfeasibleConstraints { residual: f64 },
    #[error("at least {needed} levels are required, got {got}")]
    TooFewLevels { needed: usize, got: usize },
    #[error("order policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl From<crate::quadrature::QuadratureError> for StabilityError {
    fn from(e: crate::quadrature::QuadratureError) -> Self {
        Self::Assembly(e.into())
    }
}

/// How per-tet orders are assigned; face and edge orders follow the minimum rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderPolicy {
    Uniform(u32),
    /// Order 1 on tets whose centroid has `x < 1/2`, order 0 elsewhere.
    Mixed,
    Random { lo: u32, hi: u32, seed: u64 },
    PerTet(Vec<u32>),
}

impl OrderPolicy {
    pub fn orders_for(&self, mesh: &SimplicialMesh) -> Result<OrderMap, StabilityError> {
        let tet: Vec<u32> = match self {
            Self::Uniform(r) => vec![*r; mesh.num_tets()],
            Self::Mixed => (0..mesh.num_tets()).map(|t| u32::from(mesh.centroid(t)[0] < 0.5)).collect(),
            Self::Random { lo, hi, seed } => {
                if lo > hi {
                    return Err(StabilityError::Policy(format!("empty order range {lo}..={hi}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..mesh.num_tets()).map(|_| rng.gen_range(*lo..=*hi)).collect()
            }
            Self::PerTet(list) => {
                if list.len() != mesh.num_tets() {
                    return Err(StabilityError::Policy(format!(
                        "{} orders given for {} tets",
                        list.len(),
                        mesh.num_tets()
                    )));
                }
                list.clone()
            }
        };
        Ok(OrderMap::from_tet_orders(mesh, &tet)?)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Uniform(r) => format!("uniform:{r}"),
            Self::Mixed => "mixed".into(),
            Self::Random { lo, hi, seed } => format!("random:{lo}-{hi}:seed{seed}"),
            Self::PerTet(list) => format!("per-tet:{}", list.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")),
        }
    }
}
