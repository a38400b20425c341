use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::assembly::{assemble, BlockSaddleSystem};
use crate::config::Tolerances;
use crate::interp::FnField;
use crate::linalg::{norm2, null_space, sym_generalized_eig_min_dense, sym_generalized_eigen_dense, DenseMatrix, LuFactor, SparseLu, SparseMatrix};
use crate::mesh::{OrderMap, SimplicialMesh};
use crate::tensor_ops::Material;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSup {
    pub beta: f64,
    pub eig_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelCoercivity {
    /// `min ⟨Aτ, τ⟩ / ‖τ‖²_{H(div)}` over the discrete kernel.
    pub ratio: f64,
    pub kernel_dim: usize,
    /// Pointwise lower bound `min(1/2μ, 1/(2μ + 3λ))` of the compliance.
    pub compliance_bound: f64,
    /// Largest `‖div τ‖ / ‖τ‖` over the kernel basis.
    pub max_kernel_div: f64,
}

/// Least-norm stress for prescribed divergence and skew part.
#[derive(Clone, Debug, PartialEq)]
pub struct Construction {
    pub stress_coeffs: Vec<f64>,
    pub hdiv_norm: f64,
    /// `‖σ‖_{H(div)} / (‖ω‖ + ‖μ‖)`, zero for zero data.
    pub ratio: f64,
    pub constraint_residual: f64,
}

fn unit_system(mesh: &SimplicialMesh, orders: &OrderMap, material: Material) -> Result<BlockSaddleSystem, StabilityError> {
    let zero = FnField::new(3, |_| vec![0.0; 3], |_| vec![0.0; 9]);
    Ok(assemble(mesh, orders, material, &zero, None)?)
}

/// `[B1; B2]` and the block-diagonal `L²` Gram matrix of the multiplier pair.
fn constraint_blocks(sys: &BlockSaddleSystem) -> (SparseMatrix, SparseMatrix) {
    let (ns, ne) = (sys.dofs.n_stress(), sys.dofs.n_elem);
    let b = SparseMatrix::from_blocks(2 * ne, ns, &[(0, 0, &sys.b1), (ne, 0, &sys.b2)]);
    let g = SparseMatrix::from_blocks(2 * ne, 2 * ne, &[(0, 0, &sys.elem_gram), (ne, ne, &sys.elem_gram)]);
    (b, g)
}

/// `B M⁻¹ Bᵀ` with `M` the `H(div)` Gram matrix, symmetrized, and `M⁻¹ Bᵀ`.
fn schur(sys: &BlockSaddleSystem, b: &SparseMatrix) -> Result<(DenseMatrix, DenseMatrix), StabilityError> {
    let lu = SparseLu::new(&sys.hdiv_gram())?;
    let minv_bt = lu.solve_matrix(&b.transpose().to_dense());
    let s = b.mul_dense(&minv_bt);
    let n = s.rows();
    Ok((DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)])), minv_bt))
}

/// Discrete inf-sup constant of the divergence/skew constraint in `H(div) × L² × L²`.
pub fn infsup_constant(mesh: &SimplicialMesh, orders: &OrderMap) -> Result<InfSup, StabilityError> {
    let sys = unit_system(mesh, orders, Material { lame_lambda: 1.0, lame_mu: 1.0 })?;
    infsup_of_system(&sys, &Tolerances::default())
}

pub fn infsup_of_system(sys: &BlockSaddleSystem, tol: &Tolerances) -> Result<InfSup, StabilityError> {
    let (b, g) = constraint_blocks(sys);
    let (s, _) = schur(sys, &b)?;
    let eig = sym_generalized_eig_min_dense(&s, &g, tol.eig_residual, tol.eig_max_iter)?;
    Ok(InfSup {
        beta: eig.value.max(0.0).sqrt(),
        eig_residual: eig.residual,
    })
}

/// Coercivity of the compliance form on the discrete kernel of the constraints.
pub fn kernel_coercivity(mesh: &SimplicialMesh, orders: &OrderMap, material: Material) -> Result<KernelCoercivity, StabilityError> {
    let sys = unit_system(mesh, orders, material)?;
    kernel_coercivity_of_system(&sys, &Tolerances::default())
}

pub fn kernel_coercivity_of_system(sys: &BlockSaddleSystem, tol: &Tolerances) -> Result<KernelCoercivity, StabilityError> {
    let (b, _) = constraint_blocks(sys);
    let z = null_space(&b.to_dense(), tol.rank);
    if z.cols() == 0 {
        return Err(StabilityError::EmptyKernel);
    }
    let project = |m: &SparseMatrix| z.t_matmul(&m.mul_dense(&z));
    let (az, mz) = (project(&sys.a), project(&sys.hdiv_gram()));
    let (vals, _) = sym_generalized_eigen_dense(&az, &mz)?;
    // div τ lies in the displacement space, so its norm follows from its moments B1 τ
    // without squaring round-off.
    let moments = sys.b1.mul_dense(&z);
    let l2 = project(&sys.stress_gram);
    let max_kernel_div = (0..z.cols())
        .map(|k| {
            let d: f64 = (0..moments.rows()).map(|i| moments[(i, k)].powi(2) / sys.elem_gram.get(i, i)).sum();
            (d / l2[(k, k)]).sqrt()
        })
        .fold(0.0, f64::max);
    let m = sys.material;
    Ok(KernelCoercivity {
        ratio: vals[0],
        kernel_dim: z.cols(),
        compliance_bound: (1.0 / (2.0 * m.lame_mu)).min(1.0 / (2.0 * m.lame_mu + 3.0 * m.lame_lambda)),
        max_kernel_div,
    })
}

/// Builds the minimal `H(div)` norm stress with `div σ = μ` and `S2 σ = ω` in the discrete
/// sense, for elementwise data given by coefficient vectors.
pub fn stability_construction_check(
    mesh: &SimplicialMesh,
    orders: &OrderMap,
    omega: &[f64],
    mu: &[f64],
) -> Result<Construction, StabilityError> {
    let sys = unit_system(mesh, orders, Material { lame_lambda: 1.0, lame_mu: 1.0 })?;
    construction_of_system(&sys, omega, mu, &Tolerances::default())
}

pub fn construction_of_system(
    sys: &BlockSaddleSystem,
    omega: &[f64],
    mu: &[f64],
    tol: &Tolerances,
) -> Result<Construction, StabilityError> {
    let ne = sys.dofs.n_elem;
    if omega.len() != ne || mu.len() != ne {
        return Err(crate::linalg::LinalgError::DimensionMismatch {
            expected: ne,
            found: if omega.len() != ne { omega.len() } else { mu.len() },
        }
        .into());
    }
    let (b, _) = constraint_blocks(sys);
    let gm = sys.elem_gram.matvec(mu);
    let gw = sys.elem_gram.matvec(omega);
    let rhs: Vec<f64> = gm.iter().copied().chain(gw.iter().map(|v| -v)).collect();
    let data_norm = l2_of(&gm, mu) + l2_of(&gw, omega);
    let rhs_norm = norm2(&rhs);
    if rhs_norm == 0.0 {
        return Ok(Construction {
            stress_coeffs: vec![0.0; sys.dofs.n_stress()],
            hdiv_norm: 0.0,
            ratio: 0.0,
            constraint_residual: 0.0,
        });
    }
    let (s, minv_bt) = schur(sys, &b)?;
    let y = LuFactor::new(&s, tol.lu_pivot).solve(&rhs)?;
    let sigma = minv_bt.matvec(&y);
    let bs = b.matvec(&sigma);
    let residual = norm2(&bs.iter().zip(&rhs).map(|(p, q)| p - q).collect::<Vec<_>>()) / rhs_norm;
    if residual > tol.solve_residual.max(1e-8) {
        return Err(StabilityError::InfeasibleConstraints { residual });
    }
    let hdiv_norm = l2_of(&sys.hdiv_gram().matvec(&sigma), &sigma);
    Ok(Construction {
        ratio: hdiv_norm / data_norm,
        stress_coeffs: sigma,
        hdiv_norm,
        constraint_residual: residual,
    })
}

/// `sqrt(xᵀ G x)` given `G x`.
fn l2_of(gx: &[f64], x: &[f64]) -> f64 {
    gx.iter().zip(x).map(|(p, q)| p * q).sum::<f64>().max(0.0).sqrt()
}
