use super::report::{ConvergenceReport, ConvergenceRow, REPORT_SCHEMA};
use super::{OrderPolicy, StabilityError};
use crate::assembly::{elem_moments, error_norms, solve_case, stress_moments, BlockSaddleSystem, ManufacturedCase, Solution};
use crate::linalg::sparse_solve;
use crate::mesh::{refine_uniform_with_parents, OrderMap, SimplicialMesh};

/// `levels` meshes, each the red refinement of the previous, with orders inherited from the
/// parent tets (the policy is applied on the coarsest mesh only).
pub fn refinement_levels(
    base: &SimplicialMesh,
    policy: &OrderPolicy,
    levels: usize,
) -> Result<Vec<(SimplicialMesh, OrderMap)>, StabilityError> {
    let mut out = Vec::with_capacity(levels);
    if levels == 0 {
        return Ok(out);
    }
    let orders = policy.orders_for(base)?;
    out.push((base.clone(), orders));
    while out.len() < levels {
        let (mesh, orders) = out.last().expect("nonempty");
        let (child, parents) = refine_uniform_with_parents(mesh);
        let child_orders = orders.refine(&child, &parents);
        out.push((child, child_orders));
    }
    Ok(out)
}

/// Best approximation of the exact fields: `H(div)` projection of the stress, `L²`
/// projections of displacement and rotation.
fn best_approximation(mesh: &SimplicialMesh, sys: &BlockSaddleSystem, case: &ManufacturedCase) -> Result<Solution, StabilityError> {
    let dofs = &sys.dofs;
    let rhs = stress_moments(mesh, dofs, &case.stress, Some(&case.load))?;
    let stress = sparse_solve(&sys.hdiv_gram(), &rhs, 1e-9)?;
    let diag: Vec<f64> = (0..dofs.n_elem).map(|i| sys.elem_gram.get(i, i)).collect();
    let project = |m: Vec<f64>| m.iter().zip(&diag).map(|(v, d)| v / d).collect::<Vec<_>>();
    let disp = project(elem_moments(mesh, dofs, &case.displacement)?);
    let rot = project(elem_moments(mesh, dofs, &case.rotation)?);
    Ok(Solution::from_coeffs(mesh, dofs, stress, disp, rot)?)
}

fn rate(prev: f64, cur: f64) -> Option<f64> {
    (prev > 0.0 && cur > 0.0).then(|| (prev / cur).log2())
}

/// Solves `case` on `levels` uniformly refined meshes of `base` and tabulates errors, rates
/// and quasi-optimality ratios.
pub fn convergence_study(
    case: &ManufacturedCase,
    base: &SimplicialMesh,
    policy: &OrderPolicy,
    levels: usize,
) -> Result<ConvergenceReport, StabilityError> {
    if levels < 2 {
        return Err(StabilityError::TooFewLevels { needed: 2, got: levels });
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    for (level, (mesh, orders)) in refinement_levels(base, policy, levels)?.into_iter().enumerate() {
        let (sys, sol) = solve_case(&mesh, &orders, case)?;
        let err = error_norms(&mesh, &sol, case)?;
        let best = error_norms(&mesh, &best_approximation(&mesh, &sys, case)?, case)?;
        let prev = rows.last();
        rows.push(ConvergenceRow {
            level,
            tets: mesh.num_tets(),
            h: mesh.mesh_size(),
            dofs: sys.dofs.n_total(),
            stress_l2: err.stress_l2,
            stress_hdiv: err.stress_hdiv,
            disp_l2: err.disp_l2,
            rot_l2: err.rot_l2,
            total: err.total(),
            best_total: best.total(),
            quasi_optimality: err.total() / best.total(),
            rate_total: prev.and_then(|p| rate(p.total, err.total())),
            rate_stress_hdiv: prev.and_then(|p| rate(p.stress_hdiv, err.stress_hdiv)),
            rate_disp: prev.and_then(|p| rate(p.disp_l2, err.disp_l2)),
            rate_rot: prev.and_then(|p| rate(p.rot_l2, err.rot_l2)),
            solve_residual: sol.residual,
        });
    }
    Ok(ConvergenceReport {
        schema: REPORT_SCHEMA.into(),
        kind: "convergence".into(),
        case: case.name.clone(),
        policy: policy.label(),
        lame_lambda: case.material.lame_lambda,
        lame_mu: case.material.lame_mu,
        rows,
    })
}
