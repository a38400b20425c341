//! Reference faces and edges, their moment bases and trace polynomials.

use std::sync::OnceLock;

use crate::linalg::{DenseMatrix, QrFactor};
use crate::mesh::{LOCAL_EDGES, LOCAL_FACES};
use crate::quadrature::build_rule;
use crate::tensor_ops::{add3, cross, dot3, norm3, scale3, sub3, Vec3};

/// Vertices of the reference tetrahedron.
pub const REF_VERTICES: [Vec3; 4] = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Highest degree of the face moment basis.
pub const FACE_MAX_DEGREE: u32 = 8;

/// Parametrisation `x̂(s, t) = a + s(b − a) + t(c − a)` of a reference face with vertices
/// `a < b < c`; `nu = (b − a) × (c − a)` is the unnormalised canonical normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceParam {
    pub origin: Vec3,
    pub ds: Vec3,
    pub dt: Vec3,
    pub nu: Vec3,
}

impl FaceParam {
    pub fn from_vertices(a: Vec3, b: Vec3, c: Vec3) -> Self {
        let ds = sub3(b, a);
        let dt = sub3(c, a);
        Self {
            origin: a,
            ds,
            dt,
            nu: cross(ds, dt),
        }
    }

    pub fn point(&self, s: f64, t: f64) -> Vec3 {
        add3(self.origin, add3(scale3(s, self.ds), scale3(t, self.dt)))
    }
}

pub fn reference_face(f: usize) -> FaceParam {
    let [a, b, c] = LOCAL_FACES[f];
    FaceParam::from_vertices(REF_VERTICES[a], REF_VERTICES[b], REF_VERTICES[c])
}

/// Reference edge `e` as `(origin, direction)`, parameter in `[0, 1]`.
pub fn reference_edge(e: usize) -> (Vec3, Vec3) {
    let [a, b] = LOCAL_EDGES[e];
    (REF_VERTICES[a], sub3(REF_VERTICES[b], REF_VERTICES[a]))
}

/// Orthonormal frame of a face: tangents `t₁, t₂`, unit normal `n̂ = t₁ × t₂` along the
/// canonical normal, and in-plane coordinates `ŷ` about the face centroid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceFrame {
    pub face: usize,
    pub tangents: [Vec3; 2],
    pub normal: Vec3,
    pub centroid: Vec3,
}

impl FaceFrame {
    pub fn new(face: usize, a: Vec3, b: Vec3, c: Vec3) -> Self {
        let p = FaceParam::from_vertices(a, b, c);
        let normal = scale3(1.0 / norm3(p.nu), p.nu);
        let t1 = scale3(1.0 / norm3(p.ds), p.ds);
        let t2 = cross(normal, t1);
        let centroid = scale3(1.0 / 3.0, add3(a, add3(b, c)));
        Self {
            face,
            tangents: [t1, t2],
            normal,
            centroid,
        }
    }

    pub fn reference(f: usize) -> Self {
        let [a, b, c] = LOCAL_FACES[f];
        Self::new(f, REF_VERTICES[a], REF_VERTICES[b], REF_VERTICES[c])
    }

    pub fn coords(&self, x: Vec3) -> [f64; 2] {
        let d = sub3(x, self.centroid);
        [dot3(d, self.tangents[0]), dot3(d, self.tangents[1])]
    }
}

/// Number of bivariate monomials of degree `≤ q`; zero for negative `q`.
pub fn dim_p2(q: i64) -> usize {
    if q < 0 {
        0
    } else {
        let q = q as usize;
        (q + 1) * (q + 2) / 2
    }
}

/// Number of univariate monomials of degree `≤ q`; zero for negative `q`.
pub fn dim_p1(q: i64) -> usize {
    if q < 0 {
        0
    } else {
        q as usize + 1
    }
}

fn exps2(d: u32) -> Vec<[u32; 2]> {
    let mut v = Vec::new();
    for k in 0..=d {
        for a in (0..=k).rev() {
            v.push([a, k - a]);
        }
    }
    v
}

fn monomials2(s: f64, t: f64, exps: &[[u32; 2]]) -> Vec<f64> {
    let (u, v) = (3.0 * (s - 1.0 / 3.0), 3.0 * (t - 1.0 / 3.0));
    exps.iter().map(|e| u.powi(e[0] as i32) * v.powi(e[1] as i32)).collect()
}

/// Solves `Rᵀ X = B` for upper-triangular `R` (k × k).
pub fn solve_upper_transposed(r: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let k = r.rows();
    let mut x = b.clone();
    for i in 0..k {
        for j in 0..i {
            let f = r[(j, i)];
            if f != 0.0 {
                for c in 0..x.cols() {
                    let v = x[(j, c)];
                    x[(i, c)] -= f * v;
                }
            }
        }
        let d = r[(i, i)];
        for c in 0..x.cols() {
            x[(i, c)] /= d;
        }
    }
    x
}

/// Hierarchical basis of `P_q` on the parameter triangle, orthonormal for `ds dt`; the
/// first `dim_p2(q)` members span `P_q` for every `q ≤ FACE_MAX_DEGREE`.
pub struct FaceMomentBasis {
    exps: Vec<[u32; 2]>,
    /// Row `j` holds the monomial coefficients of `μ_j`.
    coeffs: DenseMatrix,
}

impl FaceMomentBasis {
    pub fn get() -> &'static Self {
        static B: OnceLock<FaceMomentBasis> = OnceLock::new();
        B.get_or_init(|| {
            let exps = exps2(FACE_MAX_DEGREE);
            let n = exps.len();
            let rule = build_rule(2, 2 * FACE_MAX_DEGREE + 2).expect("triangle rule");
            let mut vals = DenseMatrix::zeros(rule.len(), n);
            for (p, (x, w)) in rule.iter().enumerate() {
                let m = monomials2(x[0], x[1], &exps);
                for (j, v) in m.into_iter().enumerate() {
                    vals[(p, j)] = v * w.sqrt();
                }
            }
            let coeffs = orthonormal_coefficients(&vals, &DenseMatrix::identity(n));
            Self { exps, coeffs }
        })
    }

    /// Values of `μ_0 … μ_{dim_p2(q)−1}` at `(s, t)`.
    pub fn eval(&self, q: u32, s: f64, t: f64) -> Vec<f64> {
        assert!(q <= FACE_MAX_DEGREE, "face degree {q} above {FACE_MAX_DEGREE}");
        let n = dim_p2(q as i64);
        let m = monomials2(s, t, &self.exps[..n]);
        (0..n)
            .map(|j| self.coeffs.row(j)[..n].iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Given weighted values `V` (points × n) of `n` independent functions with coefficient rows
/// `S` (n × m), returns coefficient rows of an orthonormal basis spanning the same space in the
/// same nested order (Gram–Schmidt order, applied twice for accuracy).
pub(crate) fn orthonormal_coefficients(vals: &DenseMatrix, s: &DenseMatrix) -> DenseMatrix {
    let r = positive_r(vals);
    let c1 = solve_upper_transposed(&r, s);
    let v1 = solve_upper_transposed(&r, &vals.transpose()).transpose();
    let r2 = positive_r(&v1);
    solve_upper_transposed(&r2, &c1)
}

/// R factor with a positive diagonal, which makes the orthonormalisation unique.
fn positive_r(vals: &DenseMatrix) -> DenseMatrix {
    let n = vals.cols();
    let mut r = QrFactor::new(vals, false).r_block(n);
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in i..n {
                r[(i, j)] = -r[(i, j)];
            }
        }
    }
    r
}

/// Orthonormal shifted Legendre polynomials on `[0, 1]`: `√(2j+1) P_j(2τ − 1)`, `j ≤ q`.
pub fn edge_moment_basis(q: u32, tau: f64) -> Vec<f64> {
    let x = 2.0 * tau - 1.0;
    let mut p = Vec::with_capacity(q as usize + 1);
    let (mut p0, mut p1) = (1.0, x);
    for j in 0..=q {
        let v = match j {
            0 => 1.0,
            1 => x,
            _ => {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        p.push(v * (2.0 * j as f64 + 1.0).sqrt());
    }
    p
}

/// Which trace of a field to take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TraceKind {
    /// Scalar value on a face or edge.
    Value,
    /// `ω·n̂` on a face.
    Normal,
    /// In-plane part `ω − (ω·n̂)n̂` on a face, in tangent components.
    TangentialFace,
    /// `ω·t̂` on an edge.
    TangentialEdge,
}

/// Face (2D) or edge (1D) of the reference tetrahedron.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubSimplex {
    Face(usize),
    Edge(usize),
}

/// Polynomial on a face (in [`FaceFrame`] coordinates) or an edge (in arclength from the
/// lower vertex), with coefficient rows `coeffs[c·N + m]` over graded monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct TracePoly {
    pub dim: usize,
    pub ncomp: usize,
    pub degree: u32,
    pub coeffs: Vec<f64>,
    /// Largest fit residual; nonzero only if the trace was not a polynomial of `degree`.
    pub fit_residual: f64,
}

impl TracePoly {
    fn exps(&self) -> Vec<[u32; 2]> {
        if self.dim == 2 {
            exps2(self.degree)
        } else {
            (0..=self.degree).map(|k| [k, 0]).collect()
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> Vec<f64> {
        let e = self.exps();
        let m: Vec<f64> = e.iter().map(|e| y[0].powi(e[0] as i32) * y[1].powi(e[1] as i32)).collect();
        let n = e.len();
        (0..self.ncomp)
            .map(|c| self.coeffs[c * n..(c + 1) * n].iter().zip(&m).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Highest total degree carrying a coefficient above `tol`; `None` for the zero polynomial.
    pub fn effective_degree(&self, tol: f64) -> Option<u32> {
        let e = self.exps();
        let n = e.len();
        let mut best = None;
        for c in 0..self.ncomp {
            for (m, ex) in e.iter().enumerate() {
                if self.coeffs[c * n + m].abs() > tol {
                    let d = ex[0] + ex[1];
                    best = Some(best.map_or(d, |b: u32| b.max(d)));
                }
            }
        }
        best
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Trace of `field` on a reference subsimplex, fitted exactly by least squares at quadrature
/// points. Vector kinds require `field.ncomp == 3`.
pub fn trace(field: &super::PolyField, sub: SubSimplex, kind: TraceKind) -> TracePoly {
    let deg = field.degree;
    let (dim, exps, samples): (usize, Vec<[u32; 2]>, Vec<([f64; 2], Vec<f64>)>) = match sub {
        SubSimplex::Face(f) => {
            let frame = FaceFrame::reference(f);
            let param = reference_face(f);
            let rule = build_rule(2, 2 * deg + 2).expect("triangle rule");
            let samples = rule
                .points
                .iter()
                .map(|p| {
                    let x = param.point(p[0], p[1]);
                    let v = field.eval(x);
                    let vals = match kind {
                        TraceKind::Value => vec![v[0]],
                        TraceKind::Normal => vec![dot3([v[0], v[1], v[2]], frame.normal)],
                        TraceKind::TangentialFace => {
                            let w = [v[0], v[1], v[2]];
                            vec![dot3(w, frame.tangents[0]), dot3(w, frame.tangents[1])]
                        }
                        TraceKind::TangentialEdge => panic!("edge trace requested on a face"),
                    };
                    (frame.coords(x), vals)
                })
                .collect();
            (2, exps2(deg), samples)
        }
        SubSimplex::Edge(e) => {
            let (o, d) = reference_edge(e);
            let len = norm3(d);
            let unit = scale3(1.0 / len, d);
            let rule = build_rule(1, 2 * deg + 2).expect("edge rule");
            let samples = rule
                .points
                .iter()
                .map(|p| {
                    let x = add3(o, scale3(p[0], d));
                    let v = field.eval(x);
                    let vals = match kind {
                        TraceKind::Value => vec![v[0]],
                        TraceKind::TangentialEdge => vec![dot3([v[0], v[1], v[2]], unit)],
                        _ => panic!("face trace requested on an edge"),
                    };
                    ([p[0] * len, 0.0], vals)
                })
                .collect();
            (1, (0..=deg).map(|k| [k, 0]).collect(), samples)
        }
    };
    let ncomp = samples[0].1.len();
    let n = exps.len();
    let a = DenseMatrix::from_fn(samples.len(), n, |p, m| {
        let y = samples[p].0;
        y[0].powi(exps[m][0] as i32) * y[1].powi(exps[m][1] as i32)
    });
    let qr = QrFactor::new(&a, false);
    let mut coeffs = vec![0.0; ncomp * n];
    let mut fit_residual: f64 = 0.0;
    for c in 0..ncomp {
        let mut b: Vec<f64> = samples.iter().map(|s| s.1[c]).collect();
        let orig = b.clone();
        qr.apply_qt(&mut b);
        let x = qr.solve_r(n, &b[..n]);
        let fitted = a.matvec(&x);
        for (f, o) in fitted.iter().zip(&orig) {
            fit_residual = fit_residual.max((f - o).abs());
        }
        coeffs[c * n..(c + 1) * n].copy_from_slice(&x);
    }
    TracePoly {
        dim,
        ncomp,
        degree: deg,
        coeffs,
        fit_residual,
    }
}

