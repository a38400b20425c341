use serde::{Deserialize, Serialize};

use crate::mesh::{AffineMap, OrderMap, SimplicialMesh};
use crate::polyspace::PolyField;
use crate::tensor_ops::{s1, Mat3, Vec3};

/// Field evaluable at physical points. `cell` names the tet the point belongs to, which
/// matters for fields that are discontinuous across faces.
pub trait Field {
    fn ncomp(&self) -> usize;
    fn value(&self, x: Vec3, cell: Option<usize>) -> Vec<f64>;
    /// Row-major `ncomp × 3` matrix of `∂f_c/∂x_j`.
    fn jacobian(&self, x: Vec3, cell: Option<usize>) -> Vec<f64>;
}

type ValueFn = Box<dyn Fn(Vec3) -> Vec<f64> + Send + Sync>;

/// Field given by closures for its value and exact Jacobian.
pub struct FnField {
    ncomp: usize,
    value: ValueFn,
    jacobian: ValueFn,
}

impl FnField {
    pub fn new(
        ncomp: usize,
        value: impl Fn(Vec3) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(Vec3) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            ncomp,
            value: Box::new(value),
            jacobian: Box::new(jacobian),
        }
    }
}

impl Field for FnField {
    fn ncomp(&self) -> usize {
        self.ncomp
    }

    fn value(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        (self.value)(x)
    }

    fn jacobian(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        (self.jacobian)(x)
    }
}

/// Polynomial in physical coordinates, reusing the reference frame with `x` in place of `x̂`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalPoly(pub PolyField);

impl Field for GlobalPoly {
    fn ncomp(&self) -> usize {
        self.0.ncomp
    }

    fn value(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        self.0.eval(x)
    }

    fn jacobian(&self, x: Vec3, _: Option<usize>) -> Vec<f64> {
        self.0.jacobian(x)
    }
}

/// Pointwise `a − b`.
pub struct Difference<'a>(pub &'a dyn Field, pub &'a dyn Field);

impl Field for Difference<'_> {
    fn ncomp(&self) -> usize {
        self.0.ncomp()
    }

    fn value(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let b = self.1.value(x, cell);
        self.0.value(x, cell).iter().zip(b).map(|(p, q)| p - q).collect()
    }

    fn jacobian(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let b = self.1.jacobian(x, cell);
        self.0.jacobian(x, cell).iter().zip(b).map(|(p, q)| p - q).collect()
    }
}

/// Space a discrete field lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Elementwise polynomials, no continuity.
    Broken,
    /// Rows with continuous normal traces.
    NormalContinuous,
    /// Rows with continuous tangential traces.
    TangentialContinuous,
    /// Fully continuous.
    Continuous,
}

/// Piecewise polynomial field: element `t` is stored as a polynomial in the reference
/// coordinates of tet `t`, i.e. `f(x) = elements[t](x̂(x))`.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    pub kind: FieldKind,
    pub ncomp: usize,
    pub maps: Vec<AffineMap>,
    pub elements: Vec<PolyField>,
    /// Coefficients against a global dof basis, when the field came from one.
    pub coefficients: Option<Vec<f64>>,
    pub orders: Option<OrderMap>,
}

impl DiscreteField {
    pub fn new(kind: FieldKind, mesh: &SimplicialMesh, elements: Vec<PolyField>) -> Self {
        assert_eq!(elements.len(), mesh.num_tets(), "one polynomial per tet");
        let ncomp = elements.first().map_or(0, |e| e.ncomp);
        Self {
            kind,
            ncomp,
            maps: (0..mesh.num_tets()).map(|t| mesh.affine_of(t)).collect(),
            elements,
            coefficients: None,
            orders: None,
        }
    }

    fn locate(&self, x: Vec3) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (t, m) in self.maps.iter().enumerate() {
            let xh = m.to_reference(x);
            let outside = [-xh[0], -xh[1], -xh[2], xh[0] + xh[1] + xh[2] - 1.0]
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if outside < best.0 {
                best = (outside, t);
            }
            if outside <= 0.0 {
                break;
            }
        }
        best.1
    }

    /// Elementwise `Σ` of two fields on the same mesh.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            elements: self.elements.iter().zip(&other.elements).map(|(a, b)| a.add(b)).collect(),
            coefficients: None,
            ..self.clone()
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            elements: self.elements.iter().map(|a| a.scale(s)).collect(),
            coefficients: self.coefficients.as_ref().map(|c| c.iter().map(|v| v * s).collect()),
            ..self.clone()
        }
    }
}

impl Field for DiscreteField {
    fn ncomp(&self) -> usize {
        self.ncomp
    }

    fn value(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let t = cell.unwrap_or_else(|| self.locate(x));
        self.elements[t].eval(self.maps[t].to_reference(x))
    }

    fn jacobian(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let t = cell.unwrap_or_else(|| self.locate(x));
        let m = &self.maps[t];
        let jh = self.elements[t].jacobian(m.to_reference(x));
        // ∂f/∂x = ∂f/∂x̂ · A⁻¹
        let mut out = vec![0.0; jh.len()];
        for c in 0..self.ncomp {
            for j in 0..3 {
                out[3 * c + j] = (0..3).map(|k| jh[3 * c + k] * m.a_inv[(k, j)]).sum();
            }
        }
        out
    }
}

/// Row-wise divergence of a matrix field, as a vector field. Its Jacobian is not provided.
pub struct RowDivergence<'a>(pub &'a dyn Field);

impl Field for RowDivergence<'_> {
    fn ncomp(&self) -> usize {
        3
    }

    fn value(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let j = self.0.jacobian(x, cell);
        (0..3).map(|i| (0..3).map(|k| j[3 * (3 * i + k) + k]).sum()).collect()
    }

    fn jacobian(&self, _: Vec3, _: Option<usize>) -> Vec<f64> {
        vec![f64::NAN; 9]
    }
}

/// `S1 W = Wᵀ − tr(W) I` applied pointwise.
pub struct S1Applied<'a>(pub &'a dyn Field);

impl Field for S1Applied<'_> {
    fn ncomp(&self) -> usize {
        9
    }

    fn value(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        s1(&Mat3::from_slice(&self.0.value(x, cell))).to_array().to_vec()
    }

    fn jacobian(&self, x: Vec3, cell: Option<usize>) -> Vec<f64> {
        let j = self.0.jacobian(x, cell);
        let mut out = vec![0.0; 27];
        for d in 0..3 {
            let s = s1(&Mat3::from_fn(|a, b| j[3 * (3 * a + b) + d]));
            for a in 0..3 {
                for b in 0..3 {
                    out[3 * (3 * a + b) + d] = s[(a, b)];
                }
            }
        }
        out
    }
}
