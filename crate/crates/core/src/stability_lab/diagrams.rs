use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StabilityError;
use crate::interp::{
    interp_p1minus_stabilized, interp_p2, interp_p2minus, project_l2_p3, Field, FnField, GlobalPoly, RowDivergence,
    S1Applied,
};
use crate::mesh::{OrderMap, SimplicialMesh};
use crate::polyspace::{num_monomials, PolyField};
use crate::quadrature::{rule_for, MAX_DEGREE};

/// Largest relative residual of each diagram over the sampled fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagramResiduals {
    /// `div Π² U` against `Π³ div U`.
    pub div_full: f64,
    /// `Π³ div Π^{2,−} U` against `Π³ div U`.
    pub div_trimmed: f64,
    /// `Π^{2,−} S1 Π̄ W` against `Π^{2,−} S1 W`.
    pub s1_stabilized: f64,
    pub fields: usize,
}

impl DiagramResiduals {
    pub fn max(&self) -> f64 {
        self.div_full.max(self.div_trimmed).max(self.s1_stabilized)
    }
}

/// `‖a − b‖_{L²(Ω)}` (or `‖a‖` without `b`) by elementwise quadrature.
pub fn l2_distance(mesh: &SimplicialMesh, a: &dyn Field, b: Option<&dyn Field>, degree: u32) -> Result<f64, StabilityError> {
    let rule = rule_for(3, degree.min(MAX_DEGREE))?;
    let mut s = 0.0;
    for t in 0..mesh.num_tets() {
        let map = mesh.affine_of(t);
        for (xh, w) in rule.iter() {
            let x = map.to_physical(xh);
            let va = a.value(x, Some(t));
            let vb = b.map_or_else(|| vec![0.0; va.len()], |b| b.value(x, Some(t)));
            s += w * map.det.abs() * va.iter().zip(&vb).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        }
    }
    Ok(s.sqrt())
}

fn relative(mesh: &SimplicialMesh, a: &dyn Field, b: &dyn Field) -> Result<f64, StabilityError> {
    let num = l2_distance(mesh, a, Some(b), MAX_DEGREE)?;
    let den = l2_distance(mesh, b, None, MAX_DEGREE)?;
    Ok(if den > 0.0 { num / den } else { num })
}

/// Matrix fields built from sines, exponentials and their products, with exact Jacobians.
fn transcendental_fields() -> Vec<FnField> {
    let waves = FnField::new(
        9,
        |x| (0..9).map(|c| wave(c, x).0).collect(),
        |x| (0..9).flat_map(|c| wave(c, x).1).collect(),
    );
    let exps = FnField::new(
        9,
        |x| (0..9).map(|c| growth(c, x).0).collect(),
        |x| (0..9).flat_map(|c| growth(c, x).1).collect(),
    );
    let products = FnField::new(
        9,
        |x| (0..9).map(|c| wave(c, x).0 * growth(8 - c, x).0).collect(),
        |x| {
            (0..9)
                .flat_map(|c| {
                    let (a, da) = wave(c, x);
                    let (b, db) = growth(8 - c, x);
                    [0, 1, 2].map(|j| da[j] * b + a * db[j])
                })
                .collect()
        },
    );
    vec![waves, exps, products]
}

fn direction(c: usize) -> [f64; 3] {
    let c = c as f64;
    [1.0 + 0.3 * c, 0.7 - 0.2 * c, 0.5 + 0.1 * c * c - 0.4 * c]
}

/// `sin(k·x + c/3)` and its gradient.
fn wave(c: usize, x: [f64; 3]) -> (f64, [f64; 3]) {
    let k = direction(c);
    let arg = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + c as f64 / 3.0;
    (arg.sin(), k.map(|ki| ki * arg.cos()))
}

/// `exp(k·x / 2)` and its gradient.
fn growth(c: usize, x: [f64; 3]) -> (f64, [f64; 3]) {
    let k = direction(c).map(|v| 0.5 * v);
    let v = (k[0] * x[0] + k[1] * x[1] + k[2] * x[2]).exp();
    (v, k.map(|ki| ki * v))
}

/// Checks the three commuting diagrams on `n_samples` random matrix polynomials of degree
/// `r_max + 2` and on three fixed transcendental fields.
pub fn commuting_diagram_suite(
    mesh: &SimplicialMesh,
    orders: &OrderMap,
    n_samples: usize,
    seed: u64,
) -> Result<DiagramResiduals, StabilityError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degree = orders.max_order() + 2;
    let mut fields: Vec<Box<dyn Field>> = (0..n_samples)
        .map(|_| {
            let coeffs = (0..9 * num_monomials(degree)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Box::new(GlobalPoly(PolyField::from_coeffs(9, degree, coeffs))) as Box<dyn Field>
        })
        .collect();
    fields.extend(transcendental_fields().into_iter().map(|f| Box::new(f) as Box<dyn Field>));

    let mut out = DiagramResiduals {
        fields: fields.len(),
        ..Default::default()
    };
    for u in &fields {
        let u = u.as_ref();
        let div_u = project_l2_p3(mesh, orders, &RowDivergence(u))?;

        let full = interp_p2(mesh, orders, u)?;
        out.div_full = out.div_full.max(relative(mesh, &RowDivergence(&full), &div_u)?);

        let trimmed = interp_p2minus(mesh, orders, u)?;
        let lhs = project_l2_p3(mesh, orders, &RowDivergence(&trimmed))?;
        out.div_trimmed = out.div_trimmed.max(relative(mesh, &lhs, &div_u)?);

        let bar = interp_p1minus_stabilized(mesh, orders, u)?;
        let lhs = interp_p2minus(mesh, orders, &S1Applied(&bar))?;
        let rhs = interp_p2minus(mesh, orders, &S1Applied(u))?;
        out.s1_stabilized = out.s1_stabilized.max(relative(mesh, &lhs, &rhs)?);
    }
    Ok(out)
}
