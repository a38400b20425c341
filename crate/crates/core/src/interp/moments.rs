//! Moment systems of the two reference projections onto trimmed matrix spaces.
//!
//! Both systems share one row layout: face moments, then divergence moments against the
//! non-constant members of `P_r`, then auxiliary moments against the homotopy family
//! `ĥ_m(t) = (1 − t) f̂_m + t ĝ_m`. The Λ² operator acts on `Û` directly; the Λ¹ operator pairs
//! the face moments with `Ŵ` and everything else with `S1Ŵ`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::InterpError;
use crate::linalg::{row_equilibrated_logdet, DenseMatrix, LuFactor};
use crate::mesh::OrderSignature;
use crate::polyspace::{
    basis_ring, basis_variable, complement_g_basis, curl_image_basis, dim_p2, num_monomials, reference_face,
    scalar_orthonormal, FaceMomentBasis, PolyBasis, PolyField, SpaceKind, SpaceTag,
};
use crate::quadrature::{rule_for, QuadRule, MAX_DEGREE};
use crate::tensor_ops::Vec3;

/// Exactness degree of every moment quadrature.
pub const MOMENT_QUAD_DEGREE: u32 = MAX_DEGREE;

/// Number of grid intervals scanned by [`select_t`].
pub const T_GRID: u32 = 64;

/// Which trimmed projection a moment system belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projector {
    /// Onto row-wise Raviart–Thomas of order `r + 1`.
    TwoMinus,
    /// Onto row-wise Nédélec of order `r + 2` with vanishing edge traces.
    OneMinus,
}

/// `S1 W = Wᵀ − tr(W) I` as a map on row-major 9-vectors.
pub fn s1_matrix() -> DenseMatrix {
    DenseMatrix::from_fn(9, 9, |out, inp| {
        let (i, j) = (out / 3, out % 3);
        let (k, l) = (inp / 3, inp % 3);
        let transpose = if k == j && l == i { 1.0 } else { 0.0 };
        let trace = if i == j && k == l { 1.0 } else { 0.0 };
        transpose - trace
    })
}

/// Reference quadrature shared by every moment system.
pub struct RefQuadrature {
    pub tet: Arc<QuadRule>,
    pub tri: Arc<QuadRule>,
    /// Tri points mapped onto each local face.
    pub face_points: [Vec<Vec3>; 4],
}

impl RefQuadrature {
    pub fn get() -> &'static Self {
        static Q: OnceLock<RefQuadrature> = OnceLock::new();
        Q.get_or_init(|| {
            let tet = rule_for(3, MOMENT_QUAD_DEGREE).expect("tet rule");
            let tri = rule_for(2, MOMENT_QUAD_DEGREE).expect("triangle rule");
            let face_points = std::array::from_fn(|f| {
                let p = reference_face(f);
                tri.points.iter().map(|x| p.point(x[0], x[1])).collect()
            });
            Self { tet, tri, face_points }
        })
    }
}

/// Values a moment system consumes: matrix values on each face, the volume field paired with
/// `ĥ` (`Û` or `S1Ŵ`) and its row-wise divergence, at the points of [`RefQuadrature`].
#[derive(Clone, Debug, PartialEq)]
pub struct RefSamples {
    pub face: [Vec<[f64; 9]>; 4],
    pub vol: Vec<[f64; 9]>,
    pub vol_div: Vec<[f64; 3]>,
}

/// Test-function tables that depend only on the interior order `r`.
struct Tables {
    r: u32,
    /// `w_p ψ_i(x_p)`, row `p`, columns `i ≥ 1`.
    psi: DenseMatrix,
    /// `w_p μ_j(s_p, t_p)` on the triangle rule.
    mu: DenseMatrix,
    /// `w_p f̂_m(x_p)`, row `m`, column `9p + c`.
    fhat: DenseMatrix,
    ghat: DenseMatrix,
}

fn tables(r: u32) -> Result<Arc<Tables>, InterpError> {
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Tables>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("table cache poisoned").get(&r) {
        return Ok(Arc::clone(t));
    }
    let q = RefQuadrature::get();
    let s = scalar_orthonormal(r)?;
    let ps = s.tabulate(&q.tet.points);
    let np = q.tet.len();
    let psi = DenseMatrix::from_fn(np, s.dim() - 1, |p, i| q.tet.weights[p] * ps[(i + 1, p)]);
    let mub = FaceMomentBasis::get();
    let nq = dim_p2(r as i64);
    let mut mu = DenseMatrix::zeros(q.tri.len(), nq);
    for (p, (x, w)) in q.tri.iter().enumerate() {
        for (j, v) in mub.eval(r, x[0], x[1]).into_iter().enumerate() {
            mu[(p, j)] = w * v;
        }
    }
    let weigh = |b: Arc<PolyBasis>| {
        let mut t = b.tabulate(&q.tet.points);
        for m in 0..t.rows() {
            for p in 0..np {
                for c in 0..9 {
                    t[(m, 9 * p + c)] *= q.tet.weights[p];
                }
            }
        }
        t
    };
    let fhat = weigh(curl_image_basis(r)?);
    let ghat = weigh(complement_g_basis(r)?);
    let t = Arc::new(Tables { r, psi, mu, fhat, ghat });
    Ok(Arc::clone(cache.lock().expect("table cache poisoned").entry(r).or_insert(t)))
}

/// Face test vectors: the unnormalised normal, or the two parameter tangents.
fn face_vectors(p: Projector, f: usize) -> Vec<Vec3> {
    let fp = reference_face(f);
    match p {
        Projector::TwoMinus => vec![fp.nu],
        Projector::OneMinus => vec![fp.ds, fp.dt],
    }
}

/// Rows of the face block, in order `(face, row c, vector a, j)`.
fn face_rows(p: Projector, faces: [u32; 4], tb: &Tables, s: &RefSamples) -> Vec<f64> {
    let mut out = Vec::new();
    for (f, &q) in faces.iter().enumerate() {
        let nq = dim_p2(q as i64);
        let vecs = face_vectors(p, f);
        for c in 0..3 {
            for v in &vecs {
                let tr: Vec<f64> = s.face[f]
                    .iter()
                    .map(|m| m[3 * c] * v[0] + m[3 * c + 1] * v[1] + m[3 * c + 2] * v[2])
                    .collect();
                for j in 0..nq {
                    out.push((0..tr.len()).map(|pt| tb.mu[(pt, j)] * tr[pt]).sum());
                }
            }
        }
    }
    out
}

fn div_rows(tb: &Tables, s: &RefSamples) -> Vec<f64> {
    let mut out = Vec::new();
    for c in 0..3 {
        for i in 0..tb.psi.cols() {
            out.push((0..s.vol_div.len()).map(|p| tb.psi[(p, i)] * s.vol_div[p][c]).sum());
        }
    }
    out
}

/// Auxiliary rows against `f̂` and `ĝ` separately.
fn aux_rows(tb: &Tables, s: &RefSamples) -> (Vec<f64>, Vec<f64>) {
    let flat: Vec<f64> = s.vol.iter().flat_map(|v| v.iter().copied()).collect();
    (tb.fhat.matvec(&flat), tb.ghat.matvec(&flat))
}

fn rows_at(p: Projector, faces: Option<[u32; 4]>, tb: &Tables, s: &RefSamples, t: f64) -> Vec<f64> {
    let mut out = match faces {
        Some(f) => face_rows(p, f, tb, s),
        None => Vec::new(),
    };
    out.extend(div_rows(tb, s));
    let (f, g) = aux_rows(tb, s);
    out.extend(f.iter().zip(&g).map(|(a, b)| (1.0 - t) * a + t * b));
    out
}

/// Samples of every member of a matrix-valued reference basis.
pub fn basis_samples(p: Projector, b: &PolyBasis) -> Vec<RefSamples> {
    let q = RefQuadrature::get();
    let s1 = s1_matrix();
    let faces: Vec<DenseMatrix> = q.face_points.iter().map(|pts| b.tabulate(pts)).collect();
    let (vol_basis, div_basis) = match p {
        Projector::TwoMinus => (b.clone(), b.map(SpaceTag::Custom("div".into()), |f| f.div())),
        Projector::OneMinus => {
            let sb = b.map(SpaceTag::Custom("s1".into()), |f| f.map_components(&s1));
            let d = sb.map(SpaceTag::Custom("div s1".into()), |f| f.div());
            (sb, d)
        }
    };
    let vol = vol_basis.tabulate(&q.tet.points);
    let div = div_basis.tabulate(&q.tet.points);
    (0..b.dim())
        .map(|i| RefSamples {
            face: std::array::from_fn(|f| {
                (0..q.tri.len())
                    .map(|pt| std::array::from_fn(|c| faces[f][(i, 9 * pt + c)]))
                    .collect()
            }),
            vol: (0..q.tet.len()).map(|pt| std::array::from_fn(|c| vol[(i, 9 * pt + c)])).collect(),
            vol_div: (0..q.tet.len()).map(|pt| std::array::from_fn(|c| div[(i, 3 * pt + c)])).collect(),
        })
        .collect()
}

/// Target space of a projector for an interior-order signature.
pub fn target_space(p: Projector, orders: OrderSignature) -> Result<PolyBasis, InterpError> {
    let rows = match p {
        Projector::TwoMinus => basis_variable(SpaceKind::HDivTrimmed, orders.shifted(1))?,
        Projector::OneMinus => basis_variable(
            SpaceKind::HCurlTrimmed,
            OrderSignature {
                tet: orders.tet + 2,
                faces: orders.faces.map(|f| f + 2),
                edges: [0; 6],
            },
        )?,
    };
    Ok(rows.row_copies())
}

/// Square moment system of one projector for one order signature at a fixed `t`.
pub struct MomentSystem {
    pub projector: Projector,
    pub orders: OrderSignature,
    pub t: f64,
    pub matrix: DenseMatrix,
    /// Matrix-valued target basis; column `k` of `matrix` holds the moments of member `k`.
    pub target: PolyBasis,
    lu: LuFactor,
}

impl MomentSystem {
    pub fn build(p: Projector, orders: OrderSignature, t: f64) -> Result<Self, InterpError> {
        if !orders.is_monotone() {
            return Err(crate::polyspace::PolySpaceError::NonMonotoneOrder(orders).into());
        }
        let tb = tables(orders.tet)?;
        let target = target_space(p, orders)?;
        let samples = basis_samples(p, &target);
        let cols: Vec<Vec<f64>> = samples.iter().map(|s| rows_at(p, Some(orders.faces), &tb, s, t)).collect();
        let nrows = cols.first().map_or_else(|| row_count(p, orders, &tb), |c| c.len());
        if nrows != target.dim() {
            return Err(InterpError::DimensionMismatch {
                rows: nrows,
                cols: target.dim(),
            });
        }
        let matrix = DenseMatrix::from_fn(nrows, nrows, |i, k| cols[k][i]);
        let lu = LuFactor::new(&matrix, 1e-13);
        if lu.is_singular() {
            return Err(InterpError::SingularMomentSystem { projector: p, orders });
        }
        Ok(Self {
            projector: p,
            orders,
            t,
            matrix,
            target,
            lu,
        })
    }

    /// Moment vector of sampled data.
    pub fn moments(&self, s: &RefSamples) -> Result<Vec<f64>, InterpError> {
        let tb = tables(self.orders.tet)?;
        Ok(rows_at(self.projector, Some(self.orders.faces), &tb, s, self.t))
    }

    /// Coefficients of the projection of sampled data in the target basis.
    pub fn solve(&self, s: &RefSamples) -> Result<Vec<f64>, InterpError> {
        Ok(self.lu.solve(&self.moments(s)?)?)
    }

    /// Projection of sampled data as a reference polynomial.
    pub fn project(&self, s: &RefSamples) -> Result<PolyField, InterpError> {
        Ok(self.target.combine(&self.solve(s)?))
    }
}

fn row_count(p: Projector, orders: OrderSignature, tb: &Tables) -> usize {
    let per_face = match p {
        Projector::TwoMinus => 3,
        Projector::OneMinus => 6,
    };
    let faces: usize = orders.faces.iter().map(|&q| per_face * dim_p2(q as i64)).sum();
    faces + 3 * tb.psi.cols() + tb.fhat.rows()
}

/// Moment system at the selected `t`, cached per projector and signature.
pub fn moment_system(p: Projector, orders: OrderSignature) -> Result<Arc<MomentSystem>, InterpError> {
    type Cache = Mutex<HashMap<(Projector, OrderSignature), Arc<MomentSystem>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(s) = cache.lock().expect("moment cache poisoned").get(&(p, orders)) {
        return Ok(Arc::clone(s));
    }
    let t = select_t(orders.tet)?;
    let s = Arc::new(MomentSystem::build(p, orders, t)?);
    Ok(Arc::clone(cache.lock().expect("moment cache poisoned").entry((p, orders)).or_insert(s)))
}

/// Interior (trace-free) part of both systems as affine functions of `t`:
/// `C(t) = [D; (1 − t) F + t G]`.
struct RingPencil {
    div: Vec<Vec<f64>>,
    f: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
}

impl RingPencil {
    fn new(p: Projector, r: u32) -> Result<Self, InterpError> {
        let tb = tables(r)?;
        let ring = match p {
            Projector::TwoMinus => basis_ring(SpaceKind::HDivTrimmed, r + 1)?,
            Projector::OneMinus => basis_ring(SpaceKind::HCurlTrimmed, r + 2)?,
        };
        let samples = basis_samples(p, &ring.row_copies());
        let mut out = Self {
            div: Vec::new(),
            f: Vec::new(),
            g: Vec::new(),
        };
        for s in &samples {
            out.div.push(div_rows(&tb, s));
            let (f, g) = aux_rows(&tb, s);
            out.f.push(f);
            out.g.push(g);
        }
        let n = samples.len();
        let rows = 3 * tb.psi.cols() + tb.fhat.rows();
        if rows != n {
            return Err(InterpError::DimensionMismatch { rows, cols: n });
        }
        debug_assert_eq!(tb.r, r);
        Ok(out)
    }

    fn matrix(&self, t: f64) -> DenseMatrix {
        let n = self.div.len();
        let nd = self.div.first().map_or(0, |d| d.len());
        DenseMatrix::from_fn(n, n, |i, k| {
            if i < nd {
                self.div[k][i]
            } else {
                let m = i - nd;
                (1.0 - t) * self.f[k][m] + t * self.g[k][m]
            }
        })
    }
}

/// Score of `t` for interior order `r`: the smaller row-equilibrated `log|det|` of the two
/// trace-free systems; `−∞` when either is singular.
pub fn t_score(r: u32, t: f64) -> Result<f64, InterpError> {
    let a = RingPencil::new(Projector::TwoMinus, r)?;
    let b = RingPencil::new(Projector::OneMinus, r)?;
    Ok(row_equilibrated_logdet(&a.matrix(t)).min(row_equilibrated_logdet(&b.matrix(t))))
}

/// Homotopy parameter for interior order `r`: the grid point `j/64` maximising
/// [`t_score`], smallest `j` on ties. Cached per `r`.
pub fn select_t(r: u32) -> Result<f64, InterpError> {
    static CACHE: OnceLock<Mutex<HashMap<u32, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&t) = cache.lock().expect("t cache poisoned").get(&r) {
        return Ok(t);
    }
    let a = RingPencil::new(Projector::TwoMinus, r)?;
    let b = RingPencil::new(Projector::OneMinus, r)?;
    let mut best = (f64::NEG_INFINITY, None);
    for j in 0..=T_GRID {
        let t = j as f64 / T_GRID as f64;
        let score = row_equilibrated_logdet(&a.matrix(t)).min(row_equilibrated_logdet(&b.matrix(t)));
        if score > best.0 {
            best = (score, Some(t));
        }
    }
    let t = best.1.ok_or(InterpError::NoAdmissibleT { r })?;
    cache.lock().expect("t cache poisoned").insert(r, t);
    Ok(t)
}

/// Number of monomials used for the target basis of a projector; exposed for diagnostics.
pub fn target_degree(p: Projector, r: u32) -> (u32, usize) {
    let d = match p {
        Projector::TwoMinus => r + 1,
        Projector::OneMinus => r + 2,
    };
    (d, num_monomials(d))
}
