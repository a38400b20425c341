//! Subcommand implementations. Each returns an [`Outcome`] that `main` writes and prints.

use afw3d::assembly::{error_norms, export_coefficients, solve_case, ManufacturedCase};
use afw3d::mesh::{validate_order_map, write_mesh};
use afw3d::stability_lab::{
    commuting_diagram_suite, convergence_study, drift, refinement_levels, stability_study, OrderPolicy, StudyOptions,
    REPORT_SCHEMA,
};
use serde::Serialize;
use serde_json::Value;

use crate::checks::{checks_csv, spaces_suite, tensor_suite, Check};
use crate::config::{ConfigError, RunConfig};

/// Failure that is not a check result: bad configuration (exit 2) or a numerical breakdown
/// (exit 1).
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Compute(String),
    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn compute<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Compute(e.to_string())
}

pub struct Outcome {
    pub kind: &'static str,
    pub checks: Vec<Check>,
    pub csv: String,
    pub report: Option<Value>,
    /// Extra files written next to the reports.
    pub extra: Vec<(&'static str, String)>,
    /// Lines of the summary table (each number also appears in the JSON report).
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'a str,
    kind: &'a str,
    config: &'a RunConfig,
    checks: &'a [Check],
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a Value>,
}

impl Outcome {
    pub fn json(&self, cfg: &RunConfig) -> String {
        let env = Envelope {
            schema: REPORT_SCHEMA,
            kind: self.kind,
            config: cfg,
            checks: &self.checks,
            report: self.report.as_ref(),
        };
        let mut s = serde_json::to_string_pretty(&env).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

pub fn mesh_gen(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (mesh, policy) = cfg.load()?;
    let orders = cfg.orders_on(&mesh, &policy)?;
    let report = validate_order_map(&mesh, &orders);
    let checks = vec![
        Check::equals("euler_characteristic", mesh.euler_characteristic(), 1),
        Check::at_least(
            "min_tet_volume",
            (0..mesh.num_tets()).map(|t| mesh.volume(t)).fold(f64::INFINITY, f64::min),
            f64::MIN_POSITIVE,
        ),
        Check::equals("order_violations", report.violations.len() as i64, 0),
    ];
    let counts = [mesh.num_vertices(), mesh.num_edges(), mesh.num_faces(), mesh.num_tets()];
    let csv = format!(
        "vertices,edges,faces,tets,volume,h,max_shape_ratio\n{},{},{},{},{:.12e},{:.12e},{:.12e}\n",
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        mesh.total_volume(),
        mesh.mesh_size(),
        mesh.max_shape_ratio()
    );
    let report = serde_json::json!({
        "vertices": counts[0],
        "edges": counts[1],
        "faces": counts[2],
        "tets": counts[3],
        "volume": mesh.total_volume(),
        "h": mesh.mesh_size(),
        "max_shape_ratio": mesh.max_shape_ratio(),
    });
    Ok(Outcome {
        kind: "mesh_gen",
        summary: vec![format!(
            "V={} E={} F={} T={}  volume={:.6e}  h={:.6e}",
            counts[0],
            counts[1],
            counts[2],
            counts[3],
            mesh.total_volume(),
            mesh.mesh_size()
        )],
        checks,
        csv,
        report: Some(report),
        extra: vec![("mesh.txt", write_mesh(&mesh, Some(&orders.tet)))],
    })
}

fn check_outcome(kind: &'static str, checks: Vec<Check>) -> Outcome {
    Outcome {
        kind,
        csv: checks_csv(&checks),
        checks,
        report: None,
        extra: Vec::new(),
        summary: Vec::new(),
    }
}

pub fn verify_tensor(cfg: &RunConfig) -> Result<Outcome, RunError> {
    Ok(check_outcome("verify_tensor", tensor_suite(cfg.seed, cfg.tol_scale)))
}

pub fn verify_spaces(cfg: &RunConfig) -> Result<Outcome, RunError> {
    Ok(check_outcome("verify_spaces", spaces_suite(cfg.seed, cfg.tol_scale)))
}

/// Random polynomial samples per diagram; three transcendental fields are always added.
const DIAGRAM_SAMPLES: usize = 7;

pub fn verify_commute(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (mesh, policy) = cfg.load()?;
    let orders = cfg.orders_on(&mesh, &policy)?;
    let d = commuting_diagram_suite(&mesh, &orders, DIAGRAM_SAMPLES, cfg.seed).map_err(compute)?;
    let s = cfg.tol_scale;
    let checks = vec![
        Check::at_most("diagram_div_full", d.div_full, 1e-9 * s),
        Check::at_most("diagram_div_trimmed", d.div_trimmed, 1e-9 * s),
        Check::at_most("diagram_s1_stabilized", d.s1_stabilized, 1e-8 * s),
    ];
    let mut out = check_outcome("verify_commute", checks);
    out.report = Some(to_value(&d));
    out.summary.push(format!("{} fields on {} tets", d.fields, mesh.num_tets()));
    Ok(out)
}

fn levels_of(cfg: &RunConfig, default: usize) -> Result<Vec<(afw3d::mesh::SimplicialMesh, afw3d::mesh::OrderMap)>, RunError> {
    let (mesh, policy) = cfg.load()?;
    refinement_levels(&mesh, &policy, cfg.levels.unwrap_or(default)).map_err(compute)
}

fn policy_of(cfg: &RunConfig) -> Result<OrderPolicy, RunError> {
    Ok(cfg.load()?.1)
}

pub fn infsup(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let levels = levels_of(cfg, 2)?;
    let opts = StudyOptions {
        seed: cfg.seed,
        tolerances: cfg.tolerances(),
        ..Default::default()
    };
    let rep = stability_study(&levels, &policy_of(cfg)?, cfg.material(), &opts).map_err(compute)?;
    let s = cfg.tol_scale;
    let mut checks = Vec::new();
    for r in &rep.rows {
        checks.push(Check::at_least(format!("infsup_level{}", r.level), r.infsup, 1e-6));
        if let Some(k) = r.kernel_ratio {
            checks.push(Check::at_least(format!("kernel_ratio_level{}", r.level), k, r.compliance_bound - 1e-9 * s));
        }
    }
    if rep.rows.len() >= 2 {
        let betas: Vec<f64> = rep.rows.iter().map(|r| r.infsup).collect();
        checks.push(Check::at_most("infsup_drift", drift(&betas), 0.2));
        let ratios: Vec<f64> = rep.rows.iter().filter_map(|r| r.construction_ratio).collect();
        checks.push(Check::at_most("construction_ratio_drift", drift(&ratios), 0.25));
    }
    let summary = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "level {}  tets {:>5}  beta {:.6e}  kernel {}  construction {}",
                r.level,
                r.tets,
                r.infsup,
                r.kernel_ratio.map_or("-".into(), |v| format!("{v:.6e}")),
                r.construction_ratio.map_or("-".into(), |v| format!("{v:.6e}")),
            )
        })
        .collect();
    Ok(Outcome {
        kind: "infsup",
        csv: rep.to_csv(),
        report: Some(to_value(&rep)),
        checks,
        extra: Vec::new(),
        summary,
    })
}

pub fn solve(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (mesh, policy) = cfg.load()?;
    let orders = cfg.orders_on(&mesh, &policy)?;
    let case = ManufacturedCase::sine(cfg.material());
    let (sys, sol) = solve_case(&mesh, &orders, &case).map_err(compute)?;
    let err = error_norms(&mesh, &sol, &case).map_err(compute)?;
    let checks = vec![Check::at_most("solve_residual", sol.residual, cfg.tolerances().solve_residual)];
    let csv = format!(
        "tets,dofs,stress_l2,stress_hdiv,disp_l2,rot_l2,total,solve_residual\n{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
        mesh.num_tets(),
        sys.dofs.n_total(),
        err.stress_l2,
        err.stress_hdiv,
        err.disp_l2,
        err.rot_l2,
        err.total(),
        sol.residual
    );
    let report = serde_json::json!({
        "case": case.name,
        "tets": mesh.num_tets(),
        "dofs": sys.dofs.n_total(),
        "errors": to_value(&err),
        "solve_residual": sol.residual,
    });
    Ok(Outcome {
        kind: "solve",
        summary: vec![format!(
            "{} tets  {} dofs  stress_hdiv {:.6e}  disp_l2 {:.6e}  rot_l2 {:.6e}",
            mesh.num_tets(),
            sys.dofs.n_total(),
            err.stress_hdiv,
            err.disp_l2,
            err.rot_l2
        )],
        checks,
        csv,
        report: Some(report),
        extra: vec![("solution.txt", export_coefficients(&sol))],
    })
}

pub fn converge(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let (mesh, policy) = cfg.load()?;
    let levels = cfg.levels.unwrap_or(3);
    let case = ManufacturedCase::sine(cfg.material());
    let rep = convergence_study(&case, &mesh, &policy, levels).map_err(|e| match e {
        afw3d::stability_lab::StabilityError::TooFewLevels { .. } => RunError::Config(ConfigError::Value {
            key: "levels".into(),
            message: e.to_string(),
        }),
        e => compute(e),
    })?;
    let r_min = policy.orders_for(&mesh).map_err(compute)?.tet.iter().copied().min().unwrap_or(0);
    let last = rep.rows.last().expect("at least two levels");
    let mut checks = Vec::new();
    if r_min == 0 {
        checks.push(Check::at_least("rate_total_last", last.rate_total.unwrap_or(f64::NAN), 0.9));
    } else {
        checks.push(Check::at_least("rate_disp_last", last.rate_disp.unwrap_or(f64::NAN), r_min as f64 + 0.9));
    }
    checks.push(Check::at_most("quasi_optimality_drift", rep.quasi_optimality_drift(), 0.3));
    let summary = rep
        .rows
        .iter()
        .map(|r| {
            format!(
                "level {}  tets {:>5}  total {:.6e}  rate {}  disp rate {}  quasi-opt {:.6e}",
                r.level,
                r.tets,
                r.total,
                r.rate_total.map_or("-".into(), |v| format!("{v:.4}")),
                r.rate_disp.map_or("-".into(), |v| format!("{v:.4}")),
                r.quasi_optimality
            )
        })
        .collect();
    Ok(Outcome {
        kind: "converge",
        csv: rep.to_csv(),
        report: Some(to_value(&rep)),
        checks,
        extra: Vec::new(),
        summary,
    })
}
