use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::brezzi::{construction_of_system, infsup_of_system, kernel_coercivity_of_system};
use super::diagrams::commuting_diagram_suite;
use super::{OrderPolicy, StabilityError};
use crate::assembly::assemble;
use crate::config::Tolerances;
use crate::interp::FnField;
use crate::mesh::{OrderMap, SimplicialMesh};
use crate::tensor_ops::Material;

pub const REPORT_SCHEMA: &str = "afw3d-report/1";

/// Relative spread `(max − min) / min` of positive values.
pub fn drift(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub level: usize,
    pub tets: usize,
    pub h: f64,
    pub dofs_stress: usize,
    pub dofs_disp: usize,
    pub dofs_rot: usize,
    pub infsup: f64,
    pub infsup_eig_residual: f64,
    /// `None` when the kernel computation was skipped or the kernel is empty.
    pub kernel_dim: Option<usize>,
    pub kernel_ratio: Option<f64>,
    pub kernel_max_div: Option<f64>,
    pub compliance_bound: f64,
    pub construction_ratio: Option<f64>,
    pub diagram_div_full: Option<f64>,
    pub diagram_div_trimmed: Option<f64>,
    pub diagram_s1_stabilized: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub schema: String,
    pub kind: String,
    pub policy: String,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub seed: u64,
    pub rows: Vec<StabilityRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub tets: usize,
    pub h: f64,
    pub dofs: usize,
    pub stress_l2: f64,
    pub stress_hdiv: f64,
    pub disp_l2: f64,
    pub rot_l2: f64,
    pub total: f64,
    pub best_total: f64,
    pub quasi_optimality: f64,
    /// `log₂` of the error ratio to the previous level; absent on the first level.
    pub rate_total: Option<f64>,
    pub rate_stress_hdiv: Option<f64>,
    pub rate_disp: Option<f64>,
    pub rate_rot: Option<f64>,
    pub solve_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub kind: String,
    pub case: String,
    pub policy: String,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// What [`stability_study`] computes besides the inf-sup constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyOptions {
    /// Kernel coercivity is computed densely; skipped above this many stress dofs.
    pub kernel_max_stress_dofs: usize,
    pub construction: bool,
    /// Random polynomial samples for the diagram suite; `None` skips it.
    pub diagram_samples: Option<usize>,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            kernel_max_stress_dofs: 3000,
            construction: true,
            diagram_samples: None,
            seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

impl StabilityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,tets,h,dofs_stress,dofs_disp,dofs_rot,infsup,infsup_eig_residual,kernel_dim,kernel_ratio,kernel_max_div,compliance_bound,construction_ratio,diagram_div_full,diagram_div_trimmed,diagram_s1_stabilized\n",
        );
        for r in &self.rows {
            let cells = [
                r.level.to_string(),
                r.tets.to_string(),
                num(r.h),
                r.dofs_stress.to_string(),
                r.dofs_disp.to_string(),
                r.dofs_rot.to_string(),
                num(r.infsup),
                num(r.infsup_eig_residual),
                opt(r.kernel_dim, |v| v.to_string()),
                opt(r.kernel_ratio, num),
                opt(r.kernel_max_div, num),
                num(r.compliance_bound),
                opt(r.construction_ratio, num),
                opt(r.diagram_div_full, num),
                opt(r.diagram_div_trimmed, num),
                opt(r.diagram_s1_stabilized, num),
            ];
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "level,tets,h,dofs,stress_l2,stress_hdiv,disp_l2,rot_l2,total,best_total,quasi_optimality,rate_total,rate_stress_hdiv,rate_disp,rate_rot,solve_residual\n",
        );
        for r in &self.rows {
            let cells = [
                r.level.to_string(),
                r.tets.to_string(),
                num(r.h),
                r.dofs.to_string(),
                num(r.stress_l2),
                num(r.stress_hdiv),
                num(r.disp_l2),
                num(r.rot_l2),
                num(r.total),
                num(r.best_total),
                num(r.quasi_optimality),
                opt(r.rate_total, num),
                opt(r.rate_stress_hdiv, num),
                opt(r.rate_disp, num),
                opt(r.rate_rot, num),
                num(r.solve_residual),
            ];
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn quasi_optimality_drift(&self) -> f64 {
        drift(&self.rows.iter().map(|r| r.quasi_optimality).collect::<Vec<_>>())
    }
}

/// Inf-sup constant, kernel coercivity, least-norm construction and optionally the diagram
/// suite on each level; `policy` labels the report.
pub fn stability_study(
    levels: &[(SimplicialMesh, OrderMap)],
    policy: &OrderPolicy,
    material: Material,
    opts: &StudyOptions,
) -> Result<StabilityReport, StabilityError> {
    let zero = FnField::new(3, |_| vec![0.0; 3], |_| vec![0.0; 9]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::with_capacity(levels.len());
    for (level, (mesh, orders)) in levels.iter().enumerate() {
        let sys = assemble(mesh, orders, material, &zero, None)?;
        let tol = &opts.tolerances;
        let infsup = infsup_of_system(&sys, tol)?;
        let kernel = if sys.dofs.n_stress() <= opts.kernel_max_stress_dofs {
            match kernel_coercivity_of_system(&sys, tol) {
                Ok(k) => Some(k),
                Err(StabilityError::EmptyKernel) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let construction = if opts.construction {
            let ne = sys.dofs.n_elem;
            let omega: Vec<f64> = (0..ne).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mu: Vec<f64> = (0..ne).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Some(construction_of_system(&sys, &omega, &mu, tol)?)
        } else {
            None
        };
        let diagrams = match opts.diagram_samples {
            Some(n) => Some(commuting_diagram_suite(mesh, orders, n, opts.seed.wrapping_add(level as u64))?),
            None => None,
        };
        let m = material;
        rows.push(StabilityRow {
            level,
            tets: mesh.num_tets(),
            h: mesh.mesh_size(),
            dofs_stress: sys.dofs.n_stress(),
            dofs_disp: sys.dofs.n_disp(),
            dofs_rot: sys.dofs.n_rot(),
            infsup: infsup.beta,
            infsup_eig_residual: infsup.eig_residual,
            kernel_dim: kernel.map(|k| k.kernel_dim),
            kernel_ratio: kernel.map(|k| k.ratio),
            kernel_max_div: kernel.map(|k| k.max_kernel_div),
            compliance_bound: (1.0 / (2.0 * m.lame_mu)).min(1.0 / (2.0 * m.lame_mu + 3.0 * m.lame_lambda)),
            construction_ratio: construction.map(|c| c.ratio),
            diagram_div_full: diagrams.map(|d| d.div_full),
            diagram_div_trimmed: diagrams.map(|d| d.div_trimmed),
            diagram_s1_stabilized: diagrams.map(|d| d.s1_stabilized),
        });
    }
    Ok(StabilityReport {
        schema: REPORT_SCHEMA.into(),
        kind: "stability".into(),
        policy: policy.label(),
        lame_lambda: material.lame_lambda,
        lame_mu: material.lame_mu,
        seed: opts.seed,
        rows,
    })
}
