use super::{DenseMatrix, LinalgError};

/// Householder QR with optional column pivoting: `A P = Q R`.
#[derive(Clone, Debug)]
pub struct QrFactor {
    /// R in the upper triangle, Householder vectors (unit leading entry implied) below.
    qr: DenseMatrix,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl QrFactor {
    pub fn new(a: &DenseMatrix, pivoting: bool) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut qr = a.clone();
        let kmax = m.min(n);
        let mut tau = vec![0.0; kmax];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut colnorm: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum())
            .collect();
        for k in 0..kmax {
            if pivoting {
                // Recompute the trailing norms; cheap at the sizes used here and avoids drift.
                for j in k..n {
                    colnorm[j] = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
                }
                let mut p = k;
                for j in k + 1..n {
                    if colnorm[j] > colnorm[p] {
                        p = j;
                    }
                }
                if p != k {
                    for i in 0..m {
                        let tmp = qr[(i, k)];
                        qr[(i, k)] = qr[(i, p)];
                        qr[(i, p)] = tmp;
                    }
                    perm.swap(k, p);
                    colnorm.swap(k, p);
                }
            }
            let norm = (k..m).map(|i| qr[(i, k)] * qr[(i, k)]).sum::<f64>().sqrt();
            if norm == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            let v0 = qr[(k, k)] - alpha;
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = -v0 / alpha;
            qr[(k, k)] = alpha;
            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    let v = qr[(i, k)];
                    qr[(i, j)] -= s * v;
                }
            }
        }
        Self { qr, tau, perm }
    }

    pub fn rows(&self) -> usize {
        self.qr.rows()
    }

    pub fn cols(&self) -> usize {
        self.qr.cols()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn r_diag(&self) -> Vec<f64> {
        (0..self.tau.len()).map(|k| self.qr[(k, k)]).collect()
    }

    /// Numerical rank: count of `|R_kk| > tol·|R_00|`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let d = self.r_diag();
        let Some(first) = d.first() else { return 0 };
        let thresh = rel_tol * first.abs();
        if first.abs() == 0.0 {
            return 0;
        }
        d.iter().take_while(|v| v.abs() > thresh).count()
    }

    /// Upper-triangular `k × k` leading block of R.
    pub fn r_block(&self, k: usize) -> DenseMatrix {
        DenseMatrix::from_fn(k, k, |i, j| if j >= i { self.qr[(i, j)] } else { 0.0 })
    }

    /// Applies `Qᵀ` to `b` in place.
    pub fn apply_qt(&self, b: &mut [f64]) {
        let m = self.rows();
        for k in 0..self.tau.len() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in k + 1..m {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in k + 1..m {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Applies `Q` to `b` in place.
    pub fn apply_q(&self, b: &mut [f64]) {
        let m = self.rows();
        for k in (0..self.tau.len()).rev() {
            if self.tau[k] == 0.0 {
                continue;
            }
            let mut s = b[k];
            for i in k + 1..m {
                s += self.qr[(i, k)] * b[i];
            }
            s *= self.tau[k];
            b[k] -= s;
            for i in k + 1..m {
                b[i] -= s * self.qr[(i, k)];
            }
        }
    }

    /// Columns `from..to` of the full orthogonal factor Q.
    pub fn q_columns(&self, from: usize, to: usize) -> DenseMatrix {
        let m = self.rows();
        let mut out = DenseMatrix::zeros(m, to - from);
        let mut e = vec![0.0; m];
        for (c, j) in (from..to).enumerate() {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            out.set_column(c, &e);
        }
        out
    }

    /// Solves `R_k y = c` for the leading `k × k` block by back substitution.
    pub fn solve_r(&self, k: usize, c: &[f64]) -> Vec<f64> {
        let mut y = c[..k].to_vec();
        for i in (0..k).rev() {
            let mut s = y[i];
            for j in i + 1..k {
                s -= self.qr[(i, j)] * y[j];
            }
            y[i] = s / self.qr[(i, i)];
        }
        y
    }
}

/// Minimizes `‖Ax − b‖₂` through a column-pivoted QR.
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    assert_eq!(a.rows(), b.len(), "rhs length mismatch");
    let n = a.cols();
    if a.rows() < n {
        return Err(LinalgError::RankDeficient { rank: a.rows(), cols: n });
    }
    let qr = QrFactor::new(a, true);
    let tol = crate::config::Tolerances::default().least_squares_rank;
    let rank = qr.rank(tol);
    if rank < n {
        return Err(LinalgError::RankDeficient { rank, cols: n });
    }
    let mut c = b.to_vec();
    qr.apply_qt(&mut c);
    let y = qr.solve_r(n, &c);
    let mut x = vec![0.0; n];
    for (k, &p) in qr.perm().iter().enumerate() {
        x[p] = y[k];
    }
    Ok(x)
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space(a: &DenseMatrix, rel_tol: f64) -> DenseMatrix {
    let n = a.cols();
    if a.rows() == 0 {
        return DenseMatrix::identity(n);
    }
    let qr = QrFactor::new(&a.transpose(), true);
    let scale_rank = if a.max_abs() == 0.0 { 0 } else { qr.rank(rel_tol) };
    qr.q_columns(scale_rank, n)
}

/// Orthonormal basis (as columns) of the range of `a`, with the numerical rank.
pub fn range_space(a: &DenseMatrix, rel_tol: f64) -> DenseMatrix {
    let qr = QrFactor::new(a, true);
    let k = if a.max_abs() == 0.0 { 0 } else { qr.rank(rel_tol) };
    qr.q_columns(0, k)
}

pub fn numerical_rank(a: &DenseMatrix, rel_tol: f64) -> usize {
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0;
    }
    QrFactor::new(a, true).rank(rel_tol)
}
