use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::manufactured::ManufacturedCase;
use super::system::Solution;
use super::AssemblyError;
use crate::interp::Field;
use crate::mesh::SimplicialMesh;
use crate::quadrature::{build_rule, rule_for, MAX_DEGREE};
use crate::tensor_ops::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub stress_l2: f64,
    pub stress_hdiv: f64,
    pub disp_l2: f64,
    pub rot_l2: f64,
}

impl ErrorNorms {
    /// `‖σ − σ_h‖_{H(div)} + ‖u − u_h‖ + ‖p − p_h‖`.
    pub fn total(&self) -> f64 {
        self.stress_hdiv + self.disp_l2 + self.rot_l2
    }
}

/// Quadrature degree for error norms at maximal order `r_max`.
pub fn norm_degree(r_max: u32) -> u32 {
    2 * r_max + 10
}

fn row_div(jac: &[f64]) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|j| jac[3 * (3 * i + j) + j]).sum())
}

fn sq_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

pub fn error_norms(mesh: &SimplicialMesh, sol: &Solution, case: &ManufacturedCase) -> Result<ErrorNorms, AssemblyError> {
    let r_max = sol.displacement.orders.as_ref().map_or(0, |o| o.max_order());
    error_norms_with_degree(mesh, sol, case, norm_degree(r_max))
}

/// Norms of the differences between exact and discrete fields, by elementwise quadrature.
pub fn error_norms_with_degree(
    mesh: &SimplicialMesh,
    sol: &Solution,
    case: &ManufacturedCase,
    degree: u32,
) -> Result<ErrorNorms, AssemblyError> {
    let rule = if degree <= MAX_DEGREE { rule_for(3, degree)? } else { Arc::new(build_rule(3, degree)?) };
    let (mut s, mut d, mut u, mut p) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..mesh.num_tets() {
        let map = mesh.affine_of(t);
        for (xh, w) in rule.iter() {
            let x = map.to_physical(xh);
            let wt = w * map.det.abs();
            s += wt * sq_diff(&case.stress.value(x, Some(t)), &sol.stress.value(x, Some(t)));
            let div_h = row_div(&sol.stress.jacobian(x, Some(t)));
            d += wt * sq_diff(&case.load.value(x, Some(t)), &div_h);
            u += wt * sq_diff(&case.displacement.value(x, Some(t)), &sol.displacement.value(x, Some(t)));
            p += wt * sq_diff(&case.rotation.value(x, Some(t)), &sol.rotation.value(x, Some(t)));
        }
    }
    Ok(ErrorNorms {
        stress_l2: s.sqrt(),
        stress_hdiv: (s + d).sqrt(),
        disp_l2: u.sqrt(),
        rot_l2: p.sqrt(),
    })
}

/// Plain-text dump of the three coefficient vectors.
pub fn export_coefficients(sol: &Solution) -> String {
    let mut out = String::new();
    for (name, v) in [
        ("stress", &sol.stress_coeffs),
        ("displacement", &sol.disp_coeffs),
        ("rotation", &sol.rot_coeffs),
    ] {
        writeln!(out, "{name} {}", v.len()).expect("write to string");
        for x in v.iter() {
            writeln!(out, "{x:.16e}").expect("write to string");
        }
    }
    out
}

/// CSV table of `(point, σ, u, p)` at the given points.
pub fn export_samples(sol: &Solution, points: &[Vec3]) -> String {
    let mut out = String::from("x,y,z");
    for i in 0..3 {
        for j in 0..3 {
            write!(out, ",sigma_{i}{j}").expect("write to string");
        }
    }
    out.push_str(",u_0,u_1,u_2,p_0,p_1,p_2\n");
    for &x in points {
        let mut row: Vec<f64> = x.to_vec();
        row.extend(sol.stress.value(x, None));
        row.extend(sol.displacement.value(x, None));
        row.extend(sol.rotation.value(x, None));
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
