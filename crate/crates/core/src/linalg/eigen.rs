use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DenseMatrix, LinalgError, SparseLu, SparseMatrix};

/// Full eigen-decomposition of a symmetric matrix: ascending values, eigenvectors as columns.
pub fn sym_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    assert!(a.is_square(), "eigen of a non-square matrix");
    let n = a.rows();
    if n == 0 {
        return (Vec::new(), DenseMatrix::zeros(0, 0));
    }
    // Symmetrize to shield the reduction from round-off asymmetry.
    let mut v = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    // The EISPACK loops run over columns; storing the transpose makes them row sweeps.
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    (d, v.transpose())
}

/// Householder tridiagonalization (EISPACK tred2) acting on the transposed work array.
fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(j, i - 1)];
                v[(j, i)] = 0.0;
                v[(i, j)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(i, j)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(j, k)] * d[k];
                    e[k] += v[(j, k)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(j, k)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(j, i - 1)];
                v[(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(i, n - 1)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(i + 1, k)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(i + 1, k)] * v[(j, k)];
                }
                for k in 0..=i {
                    v[(j, k)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(j, n - 1)];
        v[(j, n - 1)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal form (EISPACK tql2), sorted ascending.
fn tql2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(i + 1, k)];
                        v[(i + 1, k)] = s * v[(i, k)] + c * h;
                        v[(i, k)] = c * v[(i, k)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    for i in 0..n - 1 {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                let tmp = v[(i, j)];
                v[(i, j)] = v[(k, j)];
                v[(k, j)] = tmp;
            }
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= 0.0 || !s.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j });
        }
        let djj = s.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Y = B` for lower-triangular `L`, sweeping whole rows.
fn forward_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut y = b.clone();
    for i in 0..n {
        let mut acc = y.row(i).to_vec();
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != 0.0 {
                for (a, yk) in acc.iter_mut().zip(y.row(k)) {
                    *a -= lik * yk;
                }
            }
        }
        let d = l[(i, i)];
        for (dst, a) in y.row_mut(i).iter_mut().zip(acc) {
            *dst = a / d;
        }
    }
    y
}

/// Solves `Lᵀ X = Y` for lower-triangular `L`, sweeping whole rows.
fn backward_solve_t(l: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let mut x = y.clone();
    for i in (0..n).rev() {
        let mut acc = x.row(i).to_vec();
        for k in i + 1..n {
            let lki = l[(k, i)];
            if lki != 0.0 {
                for (a, xk) in acc.iter_mut().zip(x.row(k)) {
                    *a -= lki * xk;
                }
            }
        }
        let d = l[(i, i)];
        for (dst, a) in x.row_mut(i).iter_mut().zip(acc) {
            *dst = a / d;
        }
    }
    x
}

/// All eigenpairs of `A x = λ B x` with `B` SPD; eigenvectors are B-orthonormal columns.
pub fn sym_generalized_eigen_dense(
    a: &DenseMatrix,
    b: &DenseMatrix,
) -> Result<(Vec<f64>, DenseMatrix), LinalgError> {
    let l = cholesky(b)?;
    let y = forward_solve(&l, a);
    let c = forward_solve(&l, &y.transpose());
    let (vals, vecs) = sym_eigen(&c);
    let x = backward_solve_t(&l, &vecs);
    Ok((vals, x))
}

/// Smallest eigenpair of the symmetric pencil with its achieved residual.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Dense problems up to this size are solved by the full decomposition.
const DENSE_CUTOFF: usize = 300;
const BLOCK: usize = 16;

/// Smallest eigenpair of `A x = λ B x` for symmetric `A`, SPD `B`.
///
/// Small pencils use the dense reduction; larger ones use inverse subspace iteration
/// with Rayleigh–Ritz on a block of 16 vectors. The residual `‖Ax − λBx‖` is measured
/// relative to `(‖A‖ + |λ|‖B‖)·‖x‖_B`.
pub fn sym_generalized_eig_min(
    a: &SparseMatrix,
    b: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, LinalgError> {
    let n = check_pencil(a.rows(), a.cols(), b)?;
    if n <= DENSE_CUTOFF {
        return dense_min(&a.to_dense(), b, tol);
    }
    let lu = SparseLu::new(a)?;
    subspace_iteration(
        n,
        |x| a.mul_dense(x),
        |y| Ok(lu.solve_matrix(y)),
        a.max_abs(),
        b,
        tol,
        max_iter,
    )
}

/// Same as [`sym_generalized_eig_min`] for a dense left-hand matrix (e.g. a Schur complement).
pub fn sym_generalized_eig_min_dense(
    a: &DenseMatrix,
    b: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, LinalgError> {
    let n = check_pencil(a.rows(), a.cols(), b)?;
    if n <= DENSE_CUTOFF {
        return dense_min(a, b, tol);
    }
    let lu = super::LuFactor::new(a, crate::config::Tolerances::default().lu_pivot);
    subspace_iteration(
        n,
        |x| a.matmul(x),
        |y| lu.solve_matrix(y),
        a.max_abs(),
        b,
        tol,
        max_iter,
    )
}

fn check_pencil(rows: usize, cols: usize, b: &SparseMatrix) -> Result<usize, LinalgError> {
    if rows != cols || rows != b.rows() || rows != b.cols() {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(LinalgError::DimensionMismatch { expected: 1, found: 0 });
    }
    Ok(rows)
}

fn dense_min(a: &DenseMatrix, b: &SparseMatrix, tol: f64) -> Result<EigenPair, LinalgError> {
    let (vals, vecs) = sym_generalized_eigen_dense(a, &b.to_dense())?;
    let x = vecs.column(0);
    let ax = a.matvec(&x);
    let residual = relative_residual(&ax, &b.matvec(&x), vals[0], &x, a.max_abs(), b.max_abs());
    if residual > tol {
        return Err(LinalgError::NoConvergence { iterations: 0, residual });
    }
    Ok(EigenPair {
        value: vals[0],
        vector: x,
        residual,
        iterations: 0,
    })
}

/// Relative residual `‖Ax − λBx‖ / ((‖A‖ + |λ|‖B‖)·‖x‖_B)`.
pub fn pencil_residual(a: &SparseMatrix, b: &SparseMatrix, lambda: f64, x: &[f64]) -> f64 {
    relative_residual(&a.matvec(x), &b.matvec(x), lambda, x, a.max_abs(), b.max_abs())
}

fn relative_residual(ax: &[f64], bx: &[f64], lambda: f64, x: &[f64], anorm: f64, bnorm: f64) -> f64 {
    let xbx: f64 = x.iter().zip(bx).map(|(p, q)| p * q).sum();
    let r = ax
        .iter()
        .zip(bx)
        .map(|(p, q)| (p - lambda * q).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = (anorm + lambda.abs() * bnorm) * xbx.max(0.0).sqrt();
    r / scale.max(f64::MIN_POSITIVE)
}

fn subspace_iteration(
    n: usize,
    apply_a: impl Fn(&DenseMatrix) -> DenseMatrix,
    solve_a: impl Fn(&DenseMatrix) -> Result<DenseMatrix, LinalgError>,
    anorm: f64,
    b: &SparseMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<EigenPair, LinalgError> {
    let block = BLOCK.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DenseMatrix::from_fn(n, block, |_, _| rng.gen_range(-1.0..1.0));
    let mut last_residual = f64::INFINITY;
    let bnorm = b.max_abs();
    for it in 1..=max_iter {
        let y = solve_a(&b.mul_dense(&x))?;
        // Rayleigh–Ritz on span(Y), orthonormalized first for conditioning.
        let q = super::qr::range_space(&y, 1e-12);
        let aq = apply_a(&q);
        let bq = b.mul_dense(&q);
        let ar = q.t_matmul(&aq);
        let br = q.t_matmul(&bq);
        let (vals, vecs) = sym_generalized_eigen_dense(&ar, &br)?;
        x = q.matmul(&vecs);
        let v = x.column(0);
        let ax = aq.matmul(&vecs).column(0);
        let bx = bq.matmul(&vecs).column(0);
        last_residual = relative_residual(&ax, &bx, vals[0], &v, anorm, bnorm);
        if last_residual <= tol {
            return Ok(EigenPair {
                value: vals[0],
                vector: v,
                residual: last_residual,
                iterations: it,
            });
        }
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}
