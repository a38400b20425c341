//! 3×3 matrix algebra: the skew identification `vec`, the algebraic operators `S1`, `S2`
//! and the isotropic compliance map.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("matrix is not antisymmetric (defect {defect:e})")]
    NotAntisymmetric { defect: f64 },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
}

/// Real 3×3 matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        }
        Mat3(m)
    }

    /// Row-major slice of nine entries.
    pub fn from_slice(s: &[f64]) -> Self {
        Self::from_fn(|i, j| s[3 * i + j])
    }

    pub fn to_array(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.0[i][j];
            }
        }
        out
    }

    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::from_fn(|i, j| [c0, c1, c2][j][i])
    }

    /// `a bᵀ`.
    pub fn outer(a: Vec3, b: Vec3) -> Self {
        Self::from_fn(|i, j| a[i] * b[j])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let cof = |i: usize, j: usize| {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
        };
        Some(Self::from_fn(|i, j| cof(j, i) / d))
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// `selfᵀ v`.
    pub fn t_mul_vec(&self, v: Vec3) -> Vec3 {
        self.transpose().mul_vec(v)
    }

    /// Frobenius inner product `A : B`.
    pub fn frob(&self, other: &Self) -> f64 {
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| self.0[i][j] * other.0[i][j]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.frob(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_fn(|i, j| s * self.0[i][j])
    }

    pub fn sym(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.0[i][j] + self.0[j][i]))
    }

    pub fn skw(&self) -> Self {
        Self::from_fn(|i, j| 0.5 * (self.0[i][j] - self.0[j][i]))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row(&self, i: usize) -> Vec3 {
        self.0[i]
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] + o.0[i][j])
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| self.0[i][j] - o.0[i][j])
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self.scale(-1.0)
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        Mat3::from_fn(|i, j| (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum())
    }
}

impl Mul<Mat3> for f64 {
    type Output = Mat3;
    fn mul(self, m: Mat3) -> Mat3 {
        m.scale(self)
    }
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3(s: f64, a: Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// The antisymmetric matrix with pattern `[[0,−v3,v2],[v3,0,−v1],[−v2,v1,0]]`.
pub fn antisym_of_vec(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
}

/// Inverse of [`antisym_of_vec`]; rejects matrices whose symmetric part exceeds `1e-12`.
pub fn vec_of_antisym(k: &Mat3) -> Result<Vec3, TensorError> {
    let defect = k.sym().max_abs();
    if defect > 1e-12 {
        return Err(TensorError::NotAntisymmetric { defect });
    }
    Ok([k[(2, 1)], k[(0, 2)], k[(1, 0)]])
}

/// `(u23 − u32, u31 − u13, u12 − u21)`.
pub fn s2(u: &Mat3) -> Vec3 {
    [u[(1, 2)] - u[(2, 1)], u[(2, 0)] - u[(0, 2)], u[(0, 1)] - u[(1, 0)]]
}

/// `Wᵀ − tr(W) I`.
pub fn s1(w: &Mat3) -> Mat3 {
    w.transpose() - Mat3::IDENTITY.scale(w.trace())
}

/// `Wᵀ − ½ tr(W) I`, the inverse of [`s1`].
pub fn s1_inv(w: &Mat3) -> Mat3 {
    w.transpose() - Mat3::IDENTITY.scale(0.5 * w.trace())
}

/// Isotropic material given by its Lamé parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

impl Material {
    pub fn new(lame_lambda: f64, lame_mu: f64) -> Result<Self, TensorError> {
        if !(lame_mu > 0.0) || !lame_lambda.is_finite() || !lame_mu.is_finite() {
            return Err(TensorError::InvalidMaterial(format!("mu must be positive, got {lame_mu}")));
        }
        if !(3.0 * lame_lambda + 2.0 * lame_mu > 0.0) {
            return Err(TensorError::InvalidMaterial(format!(
                "3 lambda + 2 mu must be positive, got {}",
                3.0 * lame_lambda + 2.0 * lame_mu
            )));
        }
        Ok(Self { lame_lambda, lame_mu })
    }

    /// Coefficient `κ` with `Aσ = σ/(2μ) − κ tr(σ) I`.
    pub fn trace_coefficient(&self) -> f64 {
        let (l, m) = (self.lame_lambda, self.lame_mu);
        l / (2.0 * m * (2.0 * m + 3.0 * l))
    }

    /// Smallest eigenvalue of the compliance map on all of 𝕄.
    pub fn compliance_lower_bound(&self) -> f64 {
        let (l, m) = (self.lame_lambda, self.lame_mu);
        (1.0 / (2.0 * m)).min(1.0 / (2.0 * m + 3.0 * l))
    }

    /// Hooke's law `2μ ε + λ tr(ε) I`.
    pub fn stress_of_strain(&self, eps: &Mat3) -> Mat3 {
        eps.scale(2.0 * self.lame_mu) + Mat3::IDENTITY.scale(self.lame_lambda * eps.trace())
    }
}

impl Default for Material {
    fn default() -> Self {
        Self { lame_lambda: 1.0, lame_mu: 1.0 }
    }
}

/// Compliance map. The symmetric part is the inverse of Hooke's law; the skew part is
/// scaled by `1/(2μ)` so that the map is positive definite on all of 𝕄.
pub fn compliance_apply(m: &Material, sigma: &Mat3) -> Mat3 {
    let inv2mu = 1.0 / (2.0 * m.lame_mu);
    let sym = sigma.sym();
    let ratio = m.lame_lambda / (2.0 * m.lame_mu + 3.0 * m.lame_lambda);
    let sym_part = (sym - Mat3::IDENTITY.scale(ratio * sigma.trace())).scale(inv2mu);
    sym_part + sigma.skw().scale(inv2mu)
}
