//! Reference stress element: the full space `P_p(T̂;ℝ³)` split into face functions dual to the
//! face flux moments and interior bubbles with vanishing normal trace.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::linalg::{DenseMatrix, QrFactor};
use crate::polyspace::face::solve_upper_transposed;
use crate::polyspace::{basis_full, basis_ring, dim_p2, face_trace_moments, PolyBasis, PolySpaceError, SpaceKind, SpaceTag};

/// Face-dual and bubble functions of one polynomial degree.
#[derive(Debug)]
pub struct StressElement {
    pub degree: u32,
    /// Face function `(f, j)` has flux moment `δ` against `μ_j` on face `f` and zero on every
    /// other face moment of degree `≤ degree`. Rows `f·dim_p2(degree) + j`.
    pub face_functions: PolyBasis,
    pub bubbles: Arc<PolyBasis>,
}

/// Local stress basis for given face degrees: kept face functions first, then bubbles.
#[derive(Clone, Debug)]
pub struct StressLocal {
    pub basis: PolyBasis,
    /// Number of kept face functions on each local face.
    pub face_counts: [usize; 4],
    pub n_bubbles: usize,
}

impl StressLocal {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Offset of the first function of local face `f`.
    pub fn face_offset(&self, f: usize) -> usize {
        self.face_counts[..f].iter().sum()
    }
}

impl StressElement {
    pub fn get(degree: u32) -> Result<Arc<Self>, PolySpaceError> {
        static CACHE: OnceLock<Mutex<HashMap<u32, Arc<StressElement>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(e) = cache.lock().expect("stress cache poisoned").get(&degree) {
            return Ok(Arc::clone(e));
        }
        let e = Arc::new(Self::build(degree)?);
        Ok(Arc::clone(cache.lock().expect("stress cache poisoned").entry(degree).or_insert(e)))
    }

    fn build(p: u32) -> Result<Self, PolySpaceError> {
        let full = basis_full(SpaceKind::HDivFull, p)?;
        let nf = dim_p2(p as i64);
        let n = full.dim();
        // Lᵀ: members × face functionals.
        let mut lt = DenseMatrix::zeros(n, 4 * nf);
        for f in 0..4 {
            let m = face_trace_moments(&full, f, SpaceKind::HDivFull, p);
            for i in 0..n {
                for j in 0..nf {
                    lt[(i, f * nf + j)] = m[(i, j)];
                }
            }
        }
        // Minimum-norm right inverse X = Q R^{-T} of L = Rᵀ Qᵀ.
        let qr = QrFactor::new(&lt, false);
        let q = qr.q_columns(0, 4 * nf);
        let r = qr.r_block(4 * nf);
        let rinv_t = solve_upper_transposed(&r, &DenseMatrix::identity(4 * nf));
        let x = q.matmul(&rinv_t);
        let face_functions = full.transform(&x.transpose(), SpaceTag::Custom(format!("stress-faces-{p}")));
        Ok(Self {
            degree: p,
            face_functions,
            bubbles: basis_ring(SpaceKind::HDivFull, p)?,
        })
    }

    /// Local basis keeping the first `dim_p2(q_f)` face functions of each face.
    pub fn local(&self, face_degrees: [u32; 4]) -> StressLocal {
        let nf = dim_p2(self.degree as i64);
        let mut rows = Vec::new();
        let mut face_counts = [0; 4];
        for (f, &q) in face_degrees.iter().enumerate() {
            let k = dim_p2(q.min(self.degree) as i64);
            face_counts[f] = k;
            rows.extend((0..k).map(|j| f * nf + j));
        }
        let faces = self.face_functions.coeffs.select_rows(&rows);
        let coeffs = faces.vstack(&self.bubbles.coeffs);
        StressLocal {
            basis: PolyBasis {
                ncomp: 3,
                degree: self.degree,
                coeffs,
                tag: SpaceTag::Custom(format!("stress-local-{}-{face_degrees:?}", self.degree)),
            },
            face_counts,
            n_bubbles: self.bubbles.dim(),
        }
    }
}
