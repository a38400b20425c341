use std::sync::OnceLock;

use crate::linalg::DenseMatrix;
use crate::tensor_ops::{Mat3, Vec3};

/// Highest total degree representable in the frame.
pub const FRAME_MAX_DEGREE: u32 = 14;

/// Frame variables are `ξ = FRAME_SCALE·(x̂ − FRAME_SHIFT)`, which keeps the monomial
/// Gram matrix well conditioned on the reference tetrahedron.
pub const FRAME_SHIFT: f64 = 0.25;
pub const FRAME_SCALE: f64 = 3.0;

struct Frame {
    exps: Vec<[u8; 3]>,
    index: Vec<usize>,
}

const SIDE: usize = FRAME_MAX_DEGREE as usize + 1;

fn frame() -> &'static Frame {
    static FRAME: OnceLock<Frame> = OnceLock::new();
    FRAME.get_or_init(|| {
        let mut exps = Vec::new();
        for d in 0..=FRAME_MAX_DEGREE as u8 {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    exps.push([a, b, d - a - b]);
                }
            }
        }
        let mut index = vec![usize::MAX; SIDE * SIDE * SIDE];
        for (i, e) in exps.iter().enumerate() {
            index[(e[0] as usize * SIDE + e[1] as usize) * SIDE + e[2] as usize] = i;
        }
        Frame { exps, index }
    })
}

/// Number of monomials of total degree `≤ d` in three variables.
pub fn num_monomials(d: u32) -> usize {
    let d = d as usize;
    (d + 1) * (d + 2) * (d + 3) / 6
}

/// Exponents of the graded monomial frame up to degree `d`.
pub fn monomial_exponents(d: u32) -> &'static [[u8; 3]] {
    &frame().exps[..num_monomials(d)]
}

fn monomial_index(e: [u8; 3]) -> usize {
    frame().index[(e[0] as usize * SIDE + e[1] as usize) * SIDE + e[2] as usize]
}

fn to_frame(x: Vec3) -> Vec3 {
    x.map(|v| FRAME_SCALE * (v - FRAME_SHIFT))
}

fn powers(v: f64, d: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(d + 1);
    let mut acc = 1.0;
    for _ in 0..=d {
        p.push(acc);
        acc *= v;
    }
    p
}

/// Values of every frame monomial of degree `≤ d` at the reference point `x̂`.
pub fn eval_monomials(x: Vec3, d: u32) -> Vec<f64> {
    let xi = to_frame(x);
    let du = d as usize;
    let (p0, p1, p2) = (powers(xi[0], du), powers(xi[1], du), powers(xi[2], du));
    monomial_exponents(d)
        .iter()
        .map(|e| p0[e[0] as usize] * p1[e[1] as usize] * p2[e[2] as usize])
        .collect()
}

/// Values and reference-coordinate gradients (`[value, ∂x̂, ∂ŷ, ∂ẑ]`) of the frame monomials.
pub fn eval_monomials_with_grad(x: Vec3, d: u32) -> Vec<[f64; 4]> {
    let xi = to_frame(x);
    let du = d as usize;
    let p = [powers(xi[0], du), powers(xi[1], du), powers(xi[2], du)];
    let dp = |axis: usize, k: u8| {
        if k == 0 {
            0.0
        } else {
            FRAME_SCALE * k as f64 * p[axis][k as usize - 1]
        }
    };
    monomial_exponents(d)
        .iter()
        .map(|e| {
            let v = [p[0][e[0] as usize], p[1][e[1] as usize], p[2][e[2] as usize]];
            [
                v[0] * v[1] * v[2],
                dp(0, e[0]) * v[1] * v[2],
                v[0] * dp(1, e[1]) * v[2],
                v[0] * v[1] * dp(2, e[2]),
            ]
        })
        .collect()
}

/// Vector-valued polynomial on the reference tetrahedron, stored as frame coefficients:
/// `coeffs[c·N + m]` multiplies monomial `m` in component `c`, with `N = num_monomials(degree)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyField {
    pub ncomp: usize,
    pub degree: u32,
    pub coeffs: Vec<f64>,
}

impl PolyField {
    pub fn zero(ncomp: usize, degree: u32) -> Self {
        Self {
            ncomp,
            degree,
            coeffs: vec![0.0; ncomp * num_monomials(degree)],
        }
    }

    pub fn from_coeffs(ncomp: usize, degree: u32, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), ncomp * num_monomials(degree), "coefficient count mismatch");
        Self { ncomp, degree, coeffs }
    }

    /// Constant field.
    pub fn constant(values: &[f64]) -> Self {
        Self {
            ncomp: values.len(),
            degree: 0,
            coeffs: values.to_vec(),
        }
    }

    /// Scalar reference coordinate `x̂_j`.
    pub fn coordinate(j: usize) -> Self {
        let mut p = Self::zero(1, 1);
        p.coeffs[0] = FRAME_SHIFT;
        let mut e = [0u8; 3];
        e[j] = 1;
        p.coeffs[monomial_index(e)] = 1.0 / FRAME_SCALE;
        p
    }

    fn nm(&self) -> usize {
        num_monomials(self.degree)
    }

    pub fn component(&self, c: usize) -> Self {
        let nm = self.nm();
        Self {
            ncomp: 1,
            degree: self.degree,
            coeffs: self.coeffs[c * nm..(c + 1) * nm].to_vec(),
        }
    }

    /// Concatenates the components of several fields of equal degree.
    pub fn stack(parts: &[PolyField]) -> Self {
        let degree = parts.iter().map(|p| p.degree).max().unwrap_or(0);
        let mut coeffs = Vec::new();
        let mut ncomp = 0;
        for p in parts {
            let p = p.with_degree(degree);
            ncomp += p.ncomp;
            coeffs.extend_from_slice(&p.coeffs);
        }
        Self { ncomp, degree, coeffs }
    }

    /// Same polynomial in a frame of a different degree; truncation must drop only zeros.
    pub fn with_degree(&self, degree: u32) -> Self {
        if degree == self.degree {
            return self.clone();
        }
        let (old, new) = (self.nm(), num_monomials(degree));
        let mut out = Self::zero(self.ncomp, degree);
        for c in 0..self.ncomp {
            for m in 0..old.min(new) {
                out.coeffs[c * new + m] = self.coeffs[c * old + m];
            }
        }
        out
    }

    /// Lowers the frame degree to the highest degree with a coefficient above `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let nm = self.nm();
        let mut deg = 0;
        for c in 0..self.ncomp {
            for (m, e) in monomial_exponents(self.degree).iter().enumerate() {
                if self.coeffs[c * nm + m].abs() > tol {
                    deg = deg.max(e.iter().map(|&k| k as u32).sum());
                }
            }
        }
        self.with_degree(deg)
    }

    pub fn eval(&self, x: Vec3) -> Vec<f64> {
        let mon = eval_monomials(x, self.degree);
        self.eval_with(&mon)
    }

    /// Evaluates against precomputed monomial values.
    pub fn eval_with(&self, mon: &[f64]) -> Vec<f64> {
        let nm = self.nm();
        (0..self.ncomp)
            .map(|c| self.coeffs[c * nm..(c + 1) * nm].iter().zip(mon).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Jacobian `∂u_c/∂x̂_j`, row-major `ncomp × 3`.
    pub fn jacobian(&self, x: Vec3) -> Vec<f64> {
        let mg = eval_monomials_with_grad(x, self.degree);
        let nm = self.nm();
        let mut out = vec![0.0; 3 * self.ncomp];
        for c in 0..self.ncomp {
            for (m, g) in mg.iter().enumerate() {
                let a = self.coeffs[c * nm + m];
                if a != 0.0 {
                    for j in 0..3 {
                        out[3 * c + j] += a * g[j + 1];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.ncomp, other.ncomp, "component mismatch");
        let d = self.degree.max(other.degree);
        let (a, b) = (self.with_degree(d), other.with_degree(d));
        Self {
            ncomp: self.ncomp,
            degree: d,
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn add_scaled(&mut self, s: f64, other: &Self) {
        let d = self.degree.max(other.degree);
        if d != self.degree {
            *self = self.with_degree(d);
        }
        let o = other.with_degree(d);
        for (a, b) in self.coeffs.iter_mut().zip(&o.coeffs) {
            *a += s * b;
        }
    }

    /// Linear combination of components: `out_i = Σ_c m[i][c]·u_c`.
    pub fn map_components(&self, m: &DenseMatrix) -> Self {
        assert_eq!(m.cols(), self.ncomp, "component map mismatch");
        let nm = self.nm();
        let mut out = Self::zero(m.rows(), self.degree);
        for i in 0..m.rows() {
            for c in 0..self.ncomp {
                let w = m[(i, c)];
                if w == 0.0 {
                    continue;
                }
                for k in 0..nm {
                    out.coeffs[i * nm + k] += w * self.coeffs[c * nm + k];
                }
            }
        }
        out
    }

    /// Pointwise `S1 W = Wᵀ − tr(W) I` of a row-major matrix field.
    pub fn s1(&self) -> Self {
        self.map_components(&pointwise(9, |w| crate::tensor_ops::s1(&Mat3::from_slice(w)).to_array().to_vec()))
    }

    /// Pointwise `S2 U` of a row-major matrix field.
    pub fn s2(&self) -> Self {
        self.map_components(&pointwise(3, |u| crate::tensor_ops::s2(&Mat3::from_slice(u)).to_vec()))
    }

    /// `∂/∂x̂_j` of every component.
    pub fn partial(&self, j: usize) -> Self {
        let nm = self.nm();
        let mut out = Self::zero(self.ncomp, self.degree);
        for (m, e) in monomial_exponents(self.degree).iter().enumerate() {
            if e[j] == 0 {
                continue;
            }
            let mut lower = *e;
            lower[j] -= 1;
            let t = monomial_index(lower);
            let f = FRAME_SCALE * e[j] as f64;
            for c in 0..self.ncomp {
                out.coeffs[c * nm + t] += f * self.coeffs[c * nm + m];
            }
        }
        out
    }

    /// Multiplies every component by the reference coordinate `x̂_j`.
    pub fn mul_coordinate(&self, j: usize) -> Self {
        let d = self.degree + 1;
        let (nm_old, nm_new) = (self.nm(), num_monomials(d));
        let mut out = Self::zero(self.ncomp, d);
        for (m, e) in monomial_exponents(self.degree).iter().enumerate() {
            let mut up = *e;
            up[j] += 1;
            let t = monomial_index(up);
            for c in 0..self.ncomp {
                let a = self.coeffs[c * nm_old + m];
                out.coeffs[c * nm_new + t] += a / FRAME_SCALE;
                out.coeffs[c * nm_new + m] += a * FRAME_SHIFT;
            }
        }
        out
    }

    /// Row-wise gradient: component `3c + j` is `∂u_c/∂x̂_j`.
    pub fn grad(&self) -> Self {
        let parts = [self.partial(0), self.partial(1), self.partial(2)];
        let nm = self.nm();
        let mut out = Self::zero(3 * self.ncomp, self.degree);
        for c in 0..self.ncomp {
            for (j, p) in parts.iter().enumerate() {
                out.coeffs[(3 * c + j) * nm..(3 * c + j + 1) * nm].copy_from_slice(&p.coeffs[c * nm..(c + 1) * nm]);
            }
        }
        out
    }

    /// Row-wise divergence of a field with `3k` components.
    pub fn div(&self) -> Self {
        assert_eq!(self.ncomp % 3, 0, "div needs rows of three components");
        let k = self.ncomp / 3;
        let nm = self.nm();
        let mut out = Self::zero(k, self.degree);
        for j in 0..3 {
            let p = self.partial(j);
            for c in 0..k {
                for m in 0..nm {
                    out.coeffs[c * nm + m] += p.coeffs[(3 * c + j) * nm + m];
                }
            }
        }
        out
    }

    /// Row-wise curl `(∂₂w₃ − ∂₃w₂, ∂₃w₁ − ∂₁w₃, ∂₁w₂ − ∂₂w₁)`.
    pub fn curl(&self) -> Self {
        assert_eq!(self.ncomp % 3, 0, "curl needs rows of three components");
        let k = self.ncomp / 3;
        let nm = self.nm();
        let d = [self.partial(0), self.partial(1), self.partial(2)];
        let mut out = Self::zero(self.ncomp, self.degree);
        let pairs = [(1, 2), (2, 0), (0, 1)];
        for c in 0..k {
            for (i, &(a, b)) in pairs.iter().enumerate() {
                for m in 0..nm {
                    out.coeffs[(3 * c + i) * nm + m] =
                        d[a].coeffs[(3 * c + b) * nm + m] - d[b].coeffs[(3 * c + a) * nm + m];
                }
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Component map applying `M ↦ L M R` to a row-major 3×3 matrix field.
pub fn matrix_sandwich(left: &crate::tensor_ops::Mat3, right: &crate::tensor_ops::Mat3) -> DenseMatrix {
    // (L M R)_{ij} = Σ_{kl} L_{ik} M_{kl} R_{lj}
    DenseMatrix::from_fn(9, 9, |row, col| {
        let (i, j) = (row / 3, row % 3);
        let (k, l) = (col / 3, col % 3);
        left[(i, k)] * right[(l, j)]
    })
}

/// Matrix of a linear map on row-major 3×3 matrices, read off from the unit matrices.
fn pointwise(out: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(out, 9);
    for c in 0..9 {
        let mut e = [0.0; 9];
        e[c] = 1.0;
        m.set_column(c, &f(&e));
    }
    m
}
