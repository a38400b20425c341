use super::{DenseMatrix, LinalgError};

/// Partial-pivoted LU factorization `P A = L U`.
#[derive(Clone, Debug)]
pub struct LuFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
    parity: f64,
    /// First pivot that fell below the relative threshold, if any.
    weak_pivot: Option<usize>,
}

impl LuFactor {
    /// Factorizes `a`. Never fails; singularity is reported by [`LuFactor::solve`].
    pub fn new(a: &DenseMatrix, pivot_tol: f64) -> Self {
        assert!(a.is_square(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity = 1.0;
        let mut weak_pivot = None;
        let threshold = pivot_tol * a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                parity = -parity;
            }
            let pivot = lu[(k, k)];
            if best <= threshold {
                if weak_pivot.is_none() {
                    weak_pivot = Some(k);
                }
                if pivot == 0.0 {
                    continue;
                }
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Self {
            lu,
            perm,
            parity,
            weak_pivot,
        }
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn is_singular(&self) -> bool {
        self.weak_pivot.is_some()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if let Some(pivot) = self.weak_pivot {
            return Err(LinalgError::SingularMatrix { pivot });
        }
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j))?;
            out.set_column(j, &x);
        }
        Ok(out)
    }

    /// Sign and natural log of `|det|`; a weak pivot yields sign 0 and `-inf`.
    pub fn det_sign_and_logmag(&self) -> (i8, f64) {
        if self.weak_pivot.is_some() {
            return (0, f64::NEG_INFINITY);
        }
        let mut sign = self.parity;
        let mut logmag = 0.0;
        for i in 0..self.dim() {
            let d = self.lu[(i, i)];
            if d < 0.0 {
                sign = -sign;
            }
            logmag += d.abs().ln();
        }
        (if sign > 0.0 { 1 } else { -1 }, logmag)
    }
}

pub fn lu_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    LuFactor::new(a, crate::config::Tolerances::default().lu_pivot).solve(b)
}

/// Determinant as `(sign, ln|det|)`; `sign == 0` comes with `f64::NEG_INFINITY`.
pub fn det_sign_and_logmag(a: &DenseMatrix) -> (i8, f64) {
    assert!(a.is_square(), "determinant of a non-square matrix");
    if a.rows() == 0 {
        return (1, 0.0);
    }
    LuFactor::new(a, crate::config::Tolerances::default().lu_pivot).det_sign_and_logmag()
}

/// `ln|det|` of `a` after scaling every row to unit max-norm; `-inf` when singular.
pub fn row_equilibrated_logdet(a: &DenseMatrix) -> f64 {
    let mut s = a.clone();
    for i in 0..s.rows() {
        let m = s.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        for v in s.row_mut(i) {
            *v /= m;
        }
    }
    let (sign, logmag) = det_sign_and_logmag(&s);
    if sign == 0 {
        f64::NEG_INFINITY
    } else {
        logmag
    }
}
