//! Self-contained verification suites for the `verify tensor` and `verify spaces` commands.

use afw3d::linalg::DenseMatrix;
use afw3d::mesh::OrderSignature;
use afw3d::polyspace::{
    aux_count, basis_full, basis_ring, basis_variable, complement_g_basis, curl_image_basis, num_monomials, reference_face,
    trace, FaceFrame, PolyField, SpaceKind, SubSimplex, TraceKind,
};
use afw3d::quadrature::rule_for;
use afw3d::tensor_ops::{compliance_apply, cross, dot3, norm3, s1, s1_inv, s2, sub3, vec_of_antisym, Mat3, Material};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `value <= threshold`, `value >= threshold` or `value == threshold`.
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=",
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=",
            threshold,
            pass: value >= threshold,
        }
    }

    pub fn equals(name: impl Into<String>, value: i64, expected: i64) -> Self {
        Self {
            name: name.into(),
            value: value as f64,
            relation: "==",
            threshold: expected as f64,
            pass: value == expected,
        }
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("name,value,relation,threshold,pass\n");
    for c in checks {
        s.push_str(&format!("{},{:.12e},{},{:.12e},{}\n", c.name, c.value, c.relation, c.threshold, c.pass));
    }
    s
}

fn random_mat(rng: &mut ChaCha8Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
}

fn random_poly(rng: &mut ChaCha8Rng, ncomp: usize, deg: u32) -> PolyField {
    let n = ncomp * num_monomials(deg);
    PolyField::from_coeffs(ncomp, deg, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// The six algebraic and differential identities on `S1`, `S2` and the compliance.
pub fn tensor_suite(seed: u64, scale: f64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inv, mut parts, mut vec) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let w = random_mat(&mut rng);
        let q = random_mat(&mut rng);
        inv = inv.max((s1_inv(&s1(&w)) - w).max_abs());
        parts = parts.max((s1(&w).frob(&q) - w.frob(&s1(&q))).abs());
        let skew = vec_of_antisym(&(w.transpose() - w)).expect("difference is antisymmetric");
        vec = vec.max((0..3).map(|i| (s2(&w)[i] - skew[i]).abs()).fold(0.0, f64::max));
    }
    let mut coercive = f64::INFINITY;
    for _ in 0..100 {
        let m = Material {
            lame_lambda: rng.gen_range(0.0..1e4),
            lame_mu: rng.gen_range(0.1..10.0),
        };
        let s = random_mat(&mut rng);
        coercive = coercive.min(compliance_apply(&m, &s).frob(&s) / (m.compliance_lower_bound() * s.frob(&s)));
    }
    let mut identity = 0.0f64;
    for _ in 0..20 {
        let w = random_poly(&mut rng, 9, 3);
        identity = identity.max(w.s1().div().add(&w.curl().s2()).max_abs_coeff());
    }
    vec![
        Check::at_most("s1_inverse_round_trip", inv, 1e-13 * scale),
        Check::at_most("s1_self_adjoint", parts, 1e-13 * scale),
        Check::at_most("s2_is_vec_of_skew_difference", vec, 1e-13 * scale),
        Check::at_least("compliance_coercivity_ratio", coercive, 1.0 - 1e-12 * scale),
        Check::at_most("div_s1_plus_s2_curl", identity, 1e-12 * scale),
        Check::at_most("s1_normal_trace_on_tangential_free_face", normal_trace_defect(&mut rng), 1e-11 * scale),
    ]
}

/// Largest `‖S1 W · n‖_{L²(F)}` over ten random `W` whose rows have no tangential trace on `F`.
fn normal_trace_defect(rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0f64;
    for case in 0..10 {
        let f = case % 4;
        let n = FaceFrame::reference(f).normal;
        let a = random_poly(rng, 3, 2).with_degree(3);
        let outer = DenseMatrix::from_fn(9, 3, |ij, c| if ij / 3 == c { n[ij % 3] } else { 0.0 });
        let q = random_poly(rng, 9, 2);
        // The barycentric coordinate of vertex f vanishes on face f.
        let bubble = if f == 0 {
            (0..3).fold(q.with_degree(3), |acc, j| acc.sub(&q.mul_coordinate(j)))
        } else {
            q.mul_coordinate(f - 1)
        };
        let w = a.map_components(&outer).add(&bubble);
        let s = w.s1();
        let param = reference_face(f);
        let (p0, p1, p2) = (param.point(0.0, 0.0), param.point(1.0, 0.0), param.point(0.0, 1.0));
        let jac = norm3(cross(sub3(p1, p0), sub3(p2, p0)));
        let rule = rule_for(2, 8).expect("triangle rule");
        let norm2: f64 = rule
            .iter()
            .map(|(y, wt)| {
                let v = Mat3::from_slice(&s.eval(param.point(y[0], y[1]))).mul_vec(n);
                wt * jac * dot3(v, v)
            })
            .sum();
        worst = worst.max(norm2.sqrt());
    }
    worst
}

/// Dimension counts and trace properties of the reference spaces.
pub fn spaces_suite(seed: u64, scale: f64) -> Vec<Check> {
    let mut out = Vec::new();
    for r in 1..=4u32 {
        let ru = r as usize;
        let formula = (2 * ru + 5) * ru * (ru - 1) / 2;
        out.push(Check::equals(format!("curl_image_dim_r{r}"), built_dim(curl_image_basis(r)), formula as i64));
        out.push(Check::equals(format!("complement_g_dim_r{r}"), built_dim(complement_g_basis(r)), aux_count(r) as i64));
    }
    let kinds = [
        ("h1", SpaceKind::H1),
        ("hcurl_full", SpaceKind::HCurlFull),
        ("hcurl_trimmed", SpaceKind::HCurlTrimmed),
        ("hdiv_full", SpaceKind::HDivFull),
        ("hdiv_trimmed", SpaceKind::HDivTrimmed),
    ];
    for (name, kind) in kinds {
        for r in 1..=3u32 {
            out.push(Check::equals(format!("{name}_dim_r{r}"), built_dim(basis_full(kind, r)), kind.dimension(r) as i64));
        }
    }
    let mut ring = 0.0f64;
    for r in 1..=3u32 {
        if let Ok(b) = basis_ring(SpaceKind::HDivFull, r) {
            for f in b.functions() {
                for face in 0..4 {
                    ring = ring.max(trace(&f, SubSimplex::Face(face), TraceKind::Normal).max_abs_coeff());
                }
            }
        }
    }
    out.push(Check::at_most("ring_hdiv_normal_trace", ring, 1e-12 * scale));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut excess = 0i64;
    for _ in 0..5 {
        let tet = rng.gen_range(1..=3u32);
        let faces = [0; 4].map(|_| rng.gen_range(0..=tet));
        let edges = std::array::from_fn(|e| (0..4).filter(|&f| face_has_edge(f, e)).map(|f| faces[f]).min().unwrap_or(tet));
        let sig = OrderSignature { tet, faces, edges };
        if let Ok(b) = basis_variable(SpaceKind::HDivFull, sig) {
            for f in b.functions() {
                for face in 0..4 {
                    let t = trace(&f, SubSimplex::Face(face), TraceKind::Normal);
                    if t.effective_degree(1e-10).is_some_and(|d| d > sig.faces[face]) {
                        excess += 1;
                    }
                }
            }
        }
    }
    out.push(Check::equals("variable_hdiv_normal_trace_degree_violations", excess, 0));
    out
}

/// Dimension of a built basis, `-1` if construction failed.
fn built_dim<E>(b: Result<std::sync::Arc<afw3d::polyspace::PolyBasis>, E>) -> i64 {
    b.map_or(-1, |b| b.dim() as i64)
}

/// Whether local edge `e` lies on local face `f` (the face opposite vertex `f`).
fn face_has_edge(f: usize, e: usize) -> bool {
    !afw3d::mesh::LOCAL_EDGES[e].contains(&f)
}
