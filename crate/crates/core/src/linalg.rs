//! Thin helpers over faer's sparse and dense types.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub type Sparse = SparseColMat<usize, f64>;

/// Builds a sparse matrix, summing duplicate entries.
pub fn from_triplets(nrows: usize, ncols: usize, trip: &[Triplet<usize, usize, f64>]) -> Sparse {
    SparseColMat::try_new_from_triplets(nrows, ncols, trip).expect("triplets within bounds")
}

pub fn entries(a: &Sparse) -> Vec<(usize, usize, f64)> {
    a.triplet_iter().map(|t| (t.row, t.col, *t.val)).collect()
}

pub fn transpose(a: &Sparse) -> Sparse {
    let trip: Vec<_> = a.triplet_iter().map(|t| Triplet::new(t.col, t.row, *t.val)).collect();
    from_triplets(a.ncols(), a.nrows(), &trip)
}

pub fn scale(a: &Sparse, s: f64) -> Sparse {
    let trip: Vec<_> = a.triplet_iter().map(|t| Triplet::new(t.row, t.col, s * t.val)).collect();
    from_triplets(a.nrows(), a.ncols(), &trip)
}

pub fn identity(n: usize) -> Sparse {
    let trip: Vec<_> = (0..n).map(|i| Triplet::new(i, i, 1.0)).collect();
    from_triplets(n, n, &trip)
}

/// Sparse matrix from a dense one, dropping exact zeros.
pub fn sparse_from_dense(m: MatRef<'_, f64>) -> Sparse {
    let mut trip = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                trip.push(Triplet::new(i, j, v));
            }
        }
    }
    from_triplets(m.nrows(), m.ncols(), &trip)
}

/// Rows `rows` and columns `cols` of `a`, in the given order.
pub fn submatrix(a: &Sparse, rows: &[usize], cols: &[usize]) -> Sparse {
    let mut rmap = vec![usize::MAX; a.nrows()];
    for (i, &r) in rows.iter().enumerate() {
        rmap[r] = i;
    }
    let mut cmap = vec![usize::MAX; a.ncols()];
    for (j, &c) in cols.iter().enumerate() {
        cmap[c] = j;
    }
    let trip: Vec<_> = a
        .triplet_iter()
        .filter(|t| rmap[t.row] != usize::MAX && cmap[t.col] != usize::MAX)
        .map(|t| Triplet::new(rmap[t.row], cmap[t.col], *t.val))
        .collect();
    from_triplets(rows.len(), cols.len(), &trip)
}

/// `Σ T_k ⊗ S_k` with flat index `t·nx + x`.
pub fn kron_sum(terms: &[(&Sparse, &Sparse)]) -> Sparse {
    assert!(!terms.is_empty());
    let (nt, mt) = (terms[0].0.nrows(), terms[0].0.ncols());
    let (nx, mx) = (terms[0].1.nrows(), terms[0].1.ncols());
    let mut trip = Vec::new();
    for (t, s) in terms {
        assert_eq!((t.nrows(), t.ncols(), s.nrows(), s.ncols()), (nt, mt, nx, mx));
        let se = entries(s);
        for tt in t.triplet_iter() {
            for &(i, j, v) in &se {
                trip.push(Triplet::new(tt.row * nx + i, tt.col * mx + j, tt.val * v));
            }
        }
    }
    from_triplets(nt * nx, mt * mx, &trip)
}

/// Column-stacks a field `U[t, x]` into the flat ordering `t·nx + x`.
pub fn flatten(u: MatRef<'_, f64>) -> Mat<f64> {
    let nx = u.ncols();
    Mat::from_fn(u.nrows() * nx, 1, |k, _| u[(k / nx, k % nx)])
}

pub fn unflatten(v: MatRef<'_, f64>, nt: usize, nx: usize) -> Mat<f64> {
    assert_eq!(v.nrows(), nt * nx);
    Mat::from_fn(nt, nx, |t, x| v[(t * nx + x, 0)])
}

pub fn dot(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(i, j)];
        }
    }
    acc
}

/// Sparse LU factorization with row pivoting.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &Sparse) -> Result<Self> {
        let lu = a.sp_lu().map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        Ok(Self { lu, n: a.nrows() })
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(b.nrows(), self.n);
        self.lu.solve(b)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    llt: Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("n", &self.n).finish()
    }
}

impl SparseCholesky {
    pub fn new(a: &Sparse) -> Result<Self> {
        let llt = a.sp_cholesky(Side::Lower).map_err(|e| Error::SingularSystem(format!("Cholesky failed: {e:?}")))?;
        Ok(Self { llt, n: a.nrows() })
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        assert_eq!(b.nrows(), self.n);
        self.llt.solve(b)
    }
}

/// Dense Cholesky; `Err` when the matrix is not numerically positive definite.
pub fn dense_cholesky(a: MatRef<'_, f64>) -> Result<faer::linalg::solvers::Llt<f64>> {
    a.llt(Side::Lower).map_err(|e| Error::SingularSystem(format!("Cholesky failed: {e:?}")))
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_sym_eigenvalue(a: MatRef<'_, f64>) -> f64 {
    let n = a.nrows();
    let s = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let ev = s.self_adjoint_eigenvalues(Side::Lower).expect("eigen decomposition converges");
    ev.into_iter().fold(f64::INFINITY, f64::min)
}
