use faer::sparse::{SparseColMat, Triplet};

use super::{DenseMatrix, LinalgError};

/// Compressed-row sparse matrix; duplicate triplets are summed on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(LinalgError::IndexOutOfRange { row: i, col: j });
            }
            sorted.push((i, j, v));
        }
        // Stable sort keeps the summation order deterministic.
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.rows(), a.cols(), &t).expect("indices in range")
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t).expect("indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over row `i`.
    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.rows {
            for (j, v) in self.row_iter(i) {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row_iter(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row_iter(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "t_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row_iter(i) {
                out[j] += v * xi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &t).expect("indices in range")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_iter(i) {
                d[(i, j)] += v;
            }
        }
        d
    }

    /// `self · b` for a dense right factor.
    pub fn mul_dense(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, b.rows(), "mul_dense dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, b.cols());
        for i in 0..self.rows {
            for (k, v) in self.row_iter(i) {
                let brow = b.row(k).to_vec();
                for (o, bv) in out.row_mut(i).iter_mut().zip(brow) {
                    *o += v * bv;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for (j, v) in self.row_iter(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.rows, self.cols, &t).expect("indices in range")
    }

    /// Assembles a block matrix from `(row_offset, col_offset, block)` pieces.
    pub fn from_blocks(rows: usize, cols: usize, blocks: &[(usize, usize, &SparseMatrix)]) -> Self {
        let mut t = Vec::new();
        for &(r0, c0, blk) in blocks {
            for (i, j, v) in blk.triplets() {
                t.push((r0 + i, c0 + j, v));
            }
        }
        Self::from_triplets(rows, cols, &t).expect("blocks fit")
    }
}

/// Sparse LU factorization backed by faer's supernodal/simplicial LU.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        if a.rows() != a.cols() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let trip: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .into_iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.rows(), a.cols(), &trip)
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(Self { n: a.rows(), lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        use faer::prelude::Solve;
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let mut rhs = faer::Mat::<f64>::zeros(self.n, 1);
        for (i, &v) in b.iter().enumerate() {
            rhs[(i, 0)] = v;
        }
        self.lu.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        use faer::prelude::Solve;
        assert_eq!(b.rows(), self.n, "rhs rows mismatch");
        let mut rhs = faer::Mat::<f64>::from_fn(self.n, b.cols(), |i, j| b[(i, j)]);
        self.lu.solve_in_place(rhs.as_mut());
        DenseMatrix::from_fn(self.n, b.cols(), |i, j| rhs[(i, j)])
    }
}

/// Solves `a x = b` and checks the relative residual.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64], rel_residual: f64) -> Result<Vec<f64>, LinalgError> {
    let lu = SparseLu::new(a)?;
    let x = lu.solve(b);
    let r = a.matvec(&x);
    let res = r.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let scale = super::dense::norm_inf(b).max(a.max_abs() * super::dense::norm_inf(&x));
    if !x.iter().all(|v| v.is_finite()) || res > rel_residual * scale.max(f64::MIN_POSITIVE) {
        return Err(LinalgError::Factorization(format!(
            "residual {res:e} exceeds {rel_residual:e} relative to {scale:e}"
        )));
    }
    Ok(x)
}
