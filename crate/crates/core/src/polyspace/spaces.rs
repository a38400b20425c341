use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::face::{
    dim_p1, dim_p2, edge_moment_basis, orthonormal_coefficients, reference_edge, reference_face,
    FaceMomentBasis, FACE_MAX_DEGREE,
};
use super::poly::{eval_monomials, num_monomials, PolyField};
use super::PolySpaceError;
use crate::linalg::{null_space, range_space, DenseMatrix, QrFactor};
use crate::mesh::OrderSignature;
use crate::quadrature::build_rule;
use crate::tensor_ops::{add3, dot3, scale3};

/// Relative rank threshold for every rank decision in this module.
pub const RANK_TOL: f64 = 1e-10;

/// Highest polynomial degree of any space built here.
pub const SPACE_MAX_DEGREE: u32 = 7;

/// Which polynomial differential-form family a space belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpaceKind {
    /// Scalar `P_r` with value traces.
    H1,
    /// `P_r(T;ℝ³)` with tangential traces.
    HCurlFull,
    /// First-kind Nédélec `P_{r−1}(T;ℝ³) + x × P_{r−1}(T;ℝ³)`.
    HCurlTrimmed,
    /// `P_r(T;ℝ³)` with normal traces.
    HDivFull,
    /// Raviart–Thomas `P_{r−1}(T;ℝ³) + x P_{r−1}(T)`.
    HDivTrimmed,
    /// Scalar `P_r` without continuity.
    L2,
}

impl SpaceKind {
    pub fn ncomp(self) -> usize {
        match self {
            SpaceKind::H1 | SpaceKind::L2 => 1,
            _ => 3,
        }
    }

    /// Polynomial degree of the space of order `r`.
    pub fn degree(self, r: u32) -> u32 {
        r
    }

    /// Analytic dimension of the full space of order `r`.
    pub fn dimension(self, r: u32) -> usize {
        let r = r as usize;
        let p = |k: usize| (k + 1) * (k + 2) * (k + 3) / 6;
        match self {
            SpaceKind::H1 | SpaceKind::L2 => p(r),
            SpaceKind::HCurlFull | SpaceKind::HDivFull => 3 * p(r),
            SpaceKind::HCurlTrimmed => r * (r + 2) * (r + 3) / 2,
            SpaceKind::HDivTrimmed => r * (r + 1) * (r + 3) / 2,
        }
    }
}

/// Identifies a reference space; used as the cache key.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceTag {
    Full { kind: SpaceKind, r: u32 },
    Ring { kind: SpaceKind, r: u32 },
    Variable { kind: SpaceKind, orders: OrderSignature },
    /// Row-wise curls of the ring Nédélec space of order `r + 1`, matrix valued.
    CurlImage { r: u32 },
    /// Complement of row-wise gradients of `P_r` in `P_{r−1}`, matrix valued.
    ComplementG { r: u32 },
    /// Three row copies of a vector space.
    Rows(Box<SpaceTag>),
    /// Ad-hoc basis built by the caller.
    Custom(String),
}

/// Basis of a polynomial space on the reference tetrahedron: row `i` of `coeffs` holds the
/// frame coefficients of member `i` (layout of [`PolyField::coeffs`]).
#[derive(Clone, Debug, PartialEq)]
pub struct PolyBasis {
    pub ncomp: usize,
    pub degree: u32,
    pub coeffs: DenseMatrix,
    pub tag: SpaceTag,
}

impl PolyBasis {
    pub fn from_fields(fields: &[PolyField], ncomp: usize, tag: SpaceTag) -> Self {
        let degree = fields.iter().map(|f| f.degree).max().unwrap_or(0);
        let w = ncomp * num_monomials(degree);
        let mut coeffs = DenseMatrix::zeros(fields.len(), w);
        for (i, f) in fields.iter().enumerate() {
            assert_eq!(f.ncomp, ncomp, "component mismatch");
            coeffs.row_mut(i).copy_from_slice(&f.with_degree(degree).coeffs);
        }
        Self {
            ncomp,
            degree,
            coeffs,
            tag,
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn function(&self, i: usize) -> PolyField {
        PolyField::from_coeffs(self.ncomp, self.degree, self.coeffs.row(i).to_vec())
    }

    pub fn functions(&self) -> Vec<PolyField> {
        (0..self.dim()).map(|i| self.function(i)).collect()
    }

    /// Linear combination `Σ_i c_i φ_i`.
    pub fn combine(&self, c: &[f64]) -> PolyField {
        let v = self.coeffs.t_matvec(c);
        PolyField::from_coeffs(self.ncomp, self.degree, v)
    }

    /// Basis whose members are the rows of `m · (members)`.
    pub fn transform(&self, m: &DenseMatrix, tag: SpaceTag) -> Self {
        Self {
            ncomp: self.ncomp,
            degree: self.degree,
            coeffs: m.matmul(&self.coeffs),
            tag,
        }
    }

    /// Applies a linear operator to every member.
    pub fn map(&self, tag: SpaceTag, f: impl Fn(&PolyField) -> PolyField) -> Self {
        let fields: Vec<PolyField> = self.functions().iter().map(f).collect();
        let ncomp = fields.first().map_or(self.ncomp, |f| f.ncomp);
        Self::from_fields(&fields, ncomp, tag)
    }

    /// Matrix-valued space whose rows each range over this vector space; member
    /// `c·dim + i` has row `c` equal to member `i` and other rows zero.
    pub fn row_copies(&self) -> Self {
        let n = self.dim();
        let w = self.coeffs.cols();
        let mut coeffs = DenseMatrix::zeros(3 * n, 3 * w);
        for c in 0..3 {
            for i in 0..n {
                coeffs.row_mut(c * n + i)[c * w..(c + 1) * w].copy_from_slice(self.coeffs.row(i));
            }
        }
        Self {
            ncomp: 3 * self.ncomp,
            degree: self.degree,
            coeffs,
            tag: SpaceTag::Rows(Box::new(self.tag.clone())),
        }
    }

    /// Member values at `points`: entry `(i, p·ncomp + c)`.
    pub fn tabulate(&self, points: &[[f64; 3]]) -> DenseMatrix {
        let nm = num_monomials(self.degree);
        let np = points.len();
        let mut mon = DenseMatrix::zeros(nm, np);
        for (p, x) in points.iter().enumerate() {
            for (m, v) in eval_monomials(*x, self.degree).into_iter().enumerate() {
                mon[(m, p)] = v;
            }
        }
        let mut out = DenseMatrix::zeros(self.dim(), np * self.ncomp);
        for c in 0..self.ncomp {
            let block = DenseMatrix::from_fn(self.dim(), nm, |i, m| self.coeffs[(i, c * nm + m)]);
            let v = block.matmul(&mon);
            for i in 0..self.dim() {
                for p in 0..np {
                    out[(i, p * self.ncomp + c)] = v[(i, p)];
                }
            }
        }
        out
    }

    /// `L²(T̂)` Gram matrix.
    pub fn gram(&self) -> DenseMatrix {
        let v = weighted_values(self);
        v.t_matmul(&v)
    }

    /// Orthonormal basis of the span, rank-revealing at [`RANK_TOL`].
    pub fn orthonormalized(&self, tag: SpaceTag) -> Self {
        orthonormal_span(self, tag)
    }
}

/// Differential operator applied row-wise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffOp {
    Grad,
    Curl,
    Div,
}

/// Exact symbolic derivative of a member.
pub fn differentiate(f: &PolyField, op: DiffOp) -> Result<PolyField, PolySpaceError> {
    match op {
        DiffOp::Grad => Ok(f.grad()),
        DiffOp::Curl | DiffOp::Div if f.ncomp % 3 != 0 => Err(PolySpaceError::Incompatible(format!(
            "{op:?} needs a multiple of three components, got {}",
            f.ncomp
        ))),
        DiffOp::Curl => Ok(f.curl()),
        DiffOp::Div => Ok(f.div()),
    }
}

/// Weighted value matrix `(√w_p φ_i,c(x_p))`, rows `(p, c)`, columns members.
fn weighted_values(b: &PolyBasis) -> DenseMatrix {
    let rule = build_rule(3, 2 * b.degree).expect("tet rule");
    let tab = b.tabulate(&rule.points);
    let nc = b.ncomp;
    DenseMatrix::from_fn(rule.len() * nc, b.dim(), |row, i| {
        let p = row / nc;
        tab[(i, row)] * rule.weights[p].sqrt()
    })
}

fn orthonormal_span(b: &PolyBasis, tag: SpaceTag) -> PolyBasis {
    if b.dim() == 0 {
        return PolyBasis { tag, ..b.clone() };
    }
    let v = weighted_values(b);
    let qr = QrFactor::new(&v, true);
    let k = if v.max_abs() == 0.0 { 0 } else { qr.rank(RANK_TOL) };
    let sel: Vec<usize> = qr.perm()[..k].to_vec();
    let coeffs = if k == 0 {
        DenseMatrix::zeros(0, b.coeffs.cols())
    } else {
        let s = b.coeffs.select_rows(&sel);
        let vs = v.select_columns(&sel);
        orthonormal_coefficients(&vs, &s)
    };
    PolyBasis {
        ncomp: b.ncomp,
        degree: b.degree,
        coeffs,
        tag,
    }
}

type Cache = Mutex<HashMap<SpaceTag, Arc<PolyBasis>>>;

fn cached(tag: SpaceTag, build: impl FnOnce() -> Result<PolyBasis, PolySpaceError>) -> Result<Arc<PolyBasis>, PolySpaceError> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache poisoned").get(&tag) {
        return Ok(Arc::clone(b));
    }
    let b = Arc::new(build()?);
    Ok(Arc::clone(
        cache.lock().expect("basis cache poisoned").entry(tag).or_insert(b),
    ))
}

fn check_degree(r: u32) -> Result<(), PolySpaceError> {
    if r > SPACE_MAX_DEGREE {
        Err(PolySpaceError::DegreeTooHigh {
            requested: r,
            max: SPACE_MAX_DEGREE,
        })
    } else {
        Ok(())
    }
}

/// Hierarchical `L²(T̂)`-orthonormal basis of scalar `P_r`; member order is nested in `r`.
pub fn scalar_orthonormal(r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    check_degree(r)?;
    cached(SpaceTag::Full { kind: SpaceKind::L2, r }, || {
        let n = num_monomials(r);
        let b = PolyBasis {
            ncomp: 1,
            degree: r,
            coeffs: DenseMatrix::identity(n),
            tag: SpaceTag::Custom("monomials".into()),
        };
        let v = weighted_values(&b);
        Ok(PolyBasis {
            coeffs: orthonormal_coefficients(&v, &b.coeffs),
            ..b
        }
        .with_tag(SpaceTag::Full { kind: SpaceKind::L2, r }))
    })
}

impl PolyBasis {
    fn with_tag(mut self, tag: SpaceTag) -> Self {
        self.tag = tag;
        self
    }
}

/// Vector fields `φ e_c` for an orthonormal scalar basis; orthonormal, component-major.
fn vectorize(s: &PolyBasis) -> Vec<PolyField> {
    let mut out = Vec::new();
    for c in 0..3 {
        for f in s.functions() {
            let mut parts = vec![PolyField::zero(1, f.degree); 3];
            parts[c] = f;
            out.push(PolyField::stack(&parts));
        }
    }
    out
}

/// Orthonormal basis of the full space of `kind` and order `r`.
pub fn basis_full(kind: SpaceKind, r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    check_degree(r)?;
    let tag = SpaceTag::Full { kind, r };
    match kind {
        SpaceKind::H1 | SpaceKind::L2 => {
            let b = scalar_orthonormal(r)?;
            cached(tag.clone(), || Ok((*b).clone().with_tag(tag)))
        }
        SpaceKind::HCurlFull | SpaceKind::HDivFull => cached(tag.clone(), || {
            let s = scalar_orthonormal(r)?;
            Ok(PolyBasis::from_fields(&vectorize(&s), 3, tag))
        }),
        SpaceKind::HCurlTrimmed | SpaceKind::HDivTrimmed => cached(tag.clone(), || {
            if r == 0 {
                return Ok(PolyBasis {
                    ncomp: 3,
                    degree: 0,
                    coeffs: DenseMatrix::zeros(0, 3),
                    tag,
                });
            }
            let s = scalar_orthonormal(r - 1)?;
            let mut fields: Vec<PolyField> = vectorize(&s).into_iter().map(|f| f.with_degree(r)).collect();
            if kind == SpaceKind::HDivTrimmed {
                for f in s.functions() {
                    fields.push(PolyField::stack(&[f.mul_coordinate(0), f.mul_coordinate(1), f.mul_coordinate(2)]));
                }
            } else {
                // x × (φ e_c)
                for f in vectorize(&s) {
                    let cross =
                        |a: usize, b: usize| f.component(b).mul_coordinate(a).sub(&f.component(a).mul_coordinate(b));
                    fields.push(PolyField::stack(&[cross(1, 2), cross(2, 0), cross(0, 1)]));
                }
            }
            let span = PolyBasis::from_fields(&fields, 3, SpaceTag::Custom("span".into()));
            Ok(orthonormal_span(&span, tag))
        }),
    }
}

/// What a trace moment pairs against.
#[derive(Clone, Copy, Debug)]
enum Trace {
    Value,
    Normal,
    /// Covariant components `(ω·(b−a), ω·(c−a))`.
    Tangential,
}

fn face_trace_kind(kind: SpaceKind) -> Option<Trace> {
    match kind {
        SpaceKind::H1 => Some(Trace::Value),
        SpaceKind::HCurlFull | SpaceKind::HCurlTrimmed => Some(Trace::Tangential),
        SpaceKind::HDivFull | SpaceKind::HDivTrimmed => Some(Trace::Normal),
        SpaceKind::L2 => None,
    }
}

/// Face moments `∫_Δ tr_c(φ_i)(x̂(s,t)) μ_j(s,t) ds dt` for `j < dim_p2(q)`; column
/// `c·dim_p2(q) + j`.
pub fn face_trace_moments(b: &PolyBasis, f: usize, kind: SpaceKind, q: u32) -> DenseMatrix {
    assert!(q <= FACE_MAX_DEGREE, "face degree {q} above {FACE_MAX_DEGREE}");
    let tr = face_trace_kind(kind).expect("space has a face trace");
    let param = reference_face(f);
    let rule = build_rule(2, b.degree + q).expect("triangle rule");
    let pts: Vec<[f64; 3]> = rule.points.iter().map(|p| param.point(p[0], p[1])).collect();
    let tab = b.tabulate(&pts);
    let nq = dim_p2(q as i64);
    let ncomp_tr = if matches!(tr, Trace::Tangential) { 2 } else { 1 };
    let mu = FaceMomentBasis::get();
    let mut out = DenseMatrix::zeros(b.dim(), ncomp_tr * nq);
    let nc = b.ncomp;
    for (p, (x, w)) in rule.iter().enumerate() {
        let m = mu.eval(q, x[0], x[1]);
        for i in 0..b.dim() {
            let v = |c: usize| tab[(i, p * nc + c)];
            let vals: [f64; 2] = match tr {
                Trace::Value => [v(0), 0.0],
                Trace::Normal => [dot3([v(0), v(1), v(2)], param.nu), 0.0],
                Trace::Tangential => {
                    let w3 = [v(0), v(1), v(2)];
                    [dot3(w3, param.ds), dot3(w3, param.dt)]
                }
            };
            for c in 0..ncomp_tr {
                for j in 0..nq {
                    out[(i, c * nq + j)] += w * vals[c] * m[j];
                }
            }
        }
    }
    out
}

/// Edge moments `∫_0^1 tr(φ_i)(x̂(τ)) L_j(τ) dτ` for `j ≤ q`, with `tr` the value or `ω·(b−a)`.
pub fn edge_trace_moments(b: &PolyBasis, e: usize, q: u32) -> DenseMatrix {
    let (o, d) = reference_edge(e);
    let rule = build_rule(1, b.degree + q).expect("edge rule");
    let pts: Vec<[f64; 3]> = rule.points.iter().map(|p| add3(o, scale3(p[0], d))).collect();
    let tab = b.tabulate(&pts);
    let nc = b.ncomp;
    let mut out = DenseMatrix::zeros(b.dim(), q as usize + 1);
    for (p, (x, w)) in rule.iter().enumerate() {
        let l = edge_moment_basis(q, x[0]);
        for i in 0..b.dim() {
            let v = if nc == 1 {
                tab[(i, p)]
            } else {
                dot3([tab[(i, p * nc)], tab[(i, p * nc + 1)], tab[(i, p * nc + 2)]], d)
            };
            for (j, lj) in l.iter().enumerate() {
                out[(i, j)] += w * v * lj;
            }
        }
    }
    out
}

/// Coordinates (in the `μ_j e_c` basis of `P_s(F;ℝ²)`, column `c·dim_p2(s) + j`) of an
/// orthonormal basis of the `ds dt`-orthogonal complement of the 2D Nédélec space of order `q`.
fn nedelec2d_complement(q: u32, s: u32) -> DenseMatrix {
    let ns = dim_p2(s as i64);
    let nlow = dim_p2(q as i64 - 1);
    let rule = build_rule(2, 2 * s + 2).expect("triangle rule");
    let mu = FaceMomentBasis::get();
    // Spanning set P_{q−1}² + (−t, s) P_{q−1} in μ coordinates.
    let mut span = DenseMatrix::zeros(2 * ns, 3 * nlow);
    for c in 0..2 {
        for j in 0..nlow {
            span[(c * ns + j, c * nlow + j)] = 1.0;
        }
    }
    for (x, w) in rule.iter() {
        let m = mu.eval(s, x[0], x[1]);
        let ml = &m[..nlow];
        for (j, &mj) in ml.iter().enumerate() {
            let v = [-x[1] * mj, x[0] * mj];
            for c in 0..2 {
                for (k, &mk) in m.iter().enumerate() {
                    span[(c * ns + k, 2 * nlow + j)] += w * v[c] * mk;
                }
            }
        }
    }
    if nlow == 0 {
        return DenseMatrix::identity(2 * ns);
    }
    let range = range_space(&span, RANK_TOL);
    null_space(&range.transpose(), RANK_TOL)
}

/// Stacks constraint columns `[a | b]` (both with `n` rows).
fn hcat(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.rows(), b.rows());
    DenseMatrix::from_fn(a.rows(), a.cols() + b.cols(), |i, j| {
        if j < a.cols() {
            a[(i, j)]
        } else {
            b[(i, j - a.cols())]
        }
    })
}

/// Members of `b` whose traces meet the constraints `Σ_i x_i C[i, :] = 0`.
fn restrict(b: &PolyBasis, constraints: &DenseMatrix, tag: SpaceTag) -> PolyBasis {
    if constraints.cols() == 0 {
        return b.clone().with_tag(tag);
    }
    // Moments of orthonormal members against orthonormal test functions are O(1); anything
    // this small is rounding noise from traces that vanish identically.
    let n = if constraints.max_abs() < 1e-12 {
        DenseMatrix::identity(b.dim())
    } else {
        null_space(&constraints.transpose(), RANK_TOL)
    };
    b.transform(&n.transpose(), tag)
}

/// Trace constraint columns selecting members of `full` (of `kind`, degree `s`) whose face and
/// edge traces lie in the target spaces of `orders`; `None` orders mean "vanish".
fn trace_constraints(full: &PolyBasis, kind: SpaceKind, s: u32, faces: [i64; 4], edges: Option<[i64; 6]>) -> DenseMatrix {
    let mut cons = DenseMatrix::zeros(full.dim(), 0);
    let Some(tr) = face_trace_kind(kind) else { return cons };
    let ns = dim_p2(s as i64);
    for (f, &q) in faces.iter().enumerate() {
        let m = face_trace_moments(full, f, kind, s);
        let sel = match (tr, kind) {
            (Trace::Tangential, SpaceKind::HCurlTrimmed) => {
                if q >= s as i64 {
                    continue;
                }
                if q <= 0 {
                    m
                } else {
                    m.matmul(&nedelec2d_complement(q as u32, s))
                }
            }
            (Trace::Tangential, _) => {
                let keep = dim_p2(q);
                let cols: Vec<usize> = (0..2).flat_map(|c| (keep..ns).map(move |j| c * ns + j)).collect();
                m.select_columns(&cols)
            }
            _ => {
                let keep = dim_p2(q);
                m.select_columns(&(keep..ns).collect::<Vec<_>>())
            }
        };
        cons = hcat(&cons, &sel);
    }
    if let Some(edges) = edges {
        for (e, &q) in edges.iter().enumerate() {
            let keep = dim_p1(q);
            if keep > s as usize {
                continue;
            }
            let m = edge_trace_moments(full, e, s);
            cons = hcat(&cons, &m.select_columns(&(keep..=s as usize).collect::<Vec<_>>()));
        }
    }
    cons
}

/// Members of the full space with every trace zero.
pub fn basis_ring(kind: SpaceKind, r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    check_degree(r)?;
    let tag = SpaceTag::Ring { kind, r };
    let full = basis_full(kind, r)?;
    cached(tag.clone(), || {
        let s = full.degree;
        let edges = match kind {
            SpaceKind::H1 | SpaceKind::HCurlFull | SpaceKind::HCurlTrimmed => Some([-1; 6]),
            _ => None,
        };
        let faces = match kind {
            SpaceKind::HCurlTrimmed => [0; 4],
            _ => [-1; 4],
        };
        let cons = trace_constraints(&full, kind, s, faces, edges);
        Ok(restrict(&full, &cons, tag))
    })
}

/// Subspace of `basis_full(kind, orders.tet)` whose traces obey the face and edge orders.
pub fn basis_variable(kind: SpaceKind, orders: OrderSignature) -> Result<Arc<PolyBasis>, PolySpaceError> {
    if !orders.is_monotone() {
        return Err(PolySpaceError::NonMonotoneOrder(orders));
    }
    let r = orders.tet;
    check_degree(r)?;
    let full = basis_full(kind, r)?;
    let tag = SpaceTag::Variable { kind, orders };
    cached(tag.clone(), || {
        let s = full.degree;
        let f = orders.faces.map(|q| q as i64);
        let e = orders.edges.map(|q| q as i64);
        let (faces, edges) = match kind {
            SpaceKind::H1 | SpaceKind::HCurlFull => (f, Some(e)),
            SpaceKind::HCurlTrimmed => (f, Some(e.map(|q| q - 1))),
            SpaceKind::HDivFull => (f, None),
            SpaceKind::HDivTrimmed => (f.map(|q| q - 1), None),
            SpaceKind::L2 => (f, None),
        };
        let cons = trace_constraints(&full, kind, s, faces, edges);
        Ok(restrict(&full, &cons, tag))
    })
}

/// Vector (single-row) version of the curl image family.
pub fn curl_image_rows(r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    let ring = basis_ring(SpaceKind::HCurlTrimmed, r + 1)?;
    cached(SpaceTag::Custom(format!("curl-image-row-{r}")), || {
        let curls = ring.map(SpaceTag::Custom("curls".into()), |f| f.curl());
        Ok(orthonormal_span(&curls, SpaceTag::Custom(format!("curl-image-row-{r}"))))
    })
}

/// Matrix-valued basis of the row-wise curls of the ring Nédélec space of order `r + 1`.
pub fn curl_image_basis(r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    let rows = curl_image_rows(r)?;
    cached(SpaceTag::CurlImage { r }, || Ok(rows.row_copies().with_tag(SpaceTag::CurlImage { r })))
}

/// Vector (single-row) complement of `∇P_r` in `P_{r−1}(T̂;ℝ³)`, `L²`-orthogonal to the gradients.
pub fn complement_g_rows(r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    cached(SpaceTag::Custom(format!("complement-g-row-{r}")), || {
        let tag = SpaceTag::Custom(format!("complement-g-row-{r}"));
        if r == 0 {
            return Ok(PolyBasis {
                ncomp: 3,
                degree: 0,
                coeffs: DenseMatrix::zeros(0, 3),
                tag,
            });
        }
        let vec_full = basis_full(SpaceKind::HDivFull, r - 1)?;
        let scal = scalar_orthonormal(r)?;
        let grads: Vec<PolyField> = scal.functions().iter().skip(1).map(|f| f.grad().with_degree(r - 1)).collect();
        // Coordinates of the gradients in the orthonormal vector basis.
        let g = PolyBasis::from_fields(&grads, 3, SpaceTag::Custom("grads".into()));
        let coords = coordinates_in(&vec_full, &g);
        let range = range_space(&coords, RANK_TOL);
        let comp = null_space(&range.transpose(), RANK_TOL);
        Ok(vec_full.transform(&comp.transpose(), tag))
    })
}

/// Matrix-valued complement basis `ĝ`, row copies of [`complement_g_rows`].
pub fn complement_g_basis(r: u32) -> Result<Arc<PolyBasis>, PolySpaceError> {
    let rows = complement_g_rows(r)?;
    cached(SpaceTag::ComplementG { r }, || Ok(rows.row_copies().with_tag(SpaceTag::ComplementG { r })))
}

/// Coordinates of the members of `b` with respect to an orthonormal basis `on`:
/// entry `(k, i) = ⟨on_k, b_i⟩`.
pub fn coordinates_in(on: &PolyBasis, b: &PolyBasis) -> DenseMatrix {
    let degree = on.degree.max(b.degree);
    let rule = build_rule(3, on.degree + b.degree).expect("tet rule");
    let lift = |x: &PolyBasis| PolyBasis::from_fields(&x.functions().iter().map(|f| f.with_degree(degree)).collect::<Vec<_>>(), x.ncomp, x.tag.clone());
    let (a, bb) = (lift(on), lift(b));
    let ta = a.tabulate(&rule.points);
    let tb = bb.tabulate(&rule.points);
    let nc = on.ncomp;
    let mut out = DenseMatrix::zeros(on.dim(), b.dim());
    for (p, w) in rule.weights.iter().enumerate() {
        for k in 0..on.dim() {
            for i in 0..b.dim() {
                let mut s = 0.0;
                for c in 0..nc {
                    s += ta[(k, p * nc + c)] * tb[(i, p * nc + c)];
                }
                out[(k, i)] += w * s;
            }
        }
    }
    out
}
