//! Dense matrix helpers sized for basis work: projection bases are at
//! most 10 x 2 and the flattened-basis covariance for the embedding is
//! at most 20 x 20, so everything here is a direct textbook method with
//! no external solver. Storage is column-major throughout, matching the
//! column-major flattening used by the trace format.

use crate::error::{Error, Result};

/// Convergence threshold on off-diagonal mass for the Jacobi
/// iterations (SVD and symmetric eigen-decomposition).
pub const JACOBI_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

/// Column-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from column-major data. `data.len()` must equal
    /// `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {} x {} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Empty("matrix needs at least one column".into()));
        }
        let rows = columns[0].len();
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("columns differ in length".into()));
        }
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            data.extend_from_slice(c);
        }
        Self::new(rows, columns.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column-major backing slice.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[c * self.rows + r] = v;
    }

    pub fn col(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// Column `i` shared and column `j` mutable at once, `i < j`.
    pub fn split_cols(&mut self, i: usize, j: usize) -> (&[f64], &mut [f64]) {
        assert!(i < j && j < self.cols, "split_cols order");
        let (lo, hi) = self.data.split_at_mut(j * self.rows);
        (&lo[i * self.rows..(i + 1) * self.rows], &mut hi[..self.rows])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * rhs`. Dimensions are a programming error here; public
    /// operations validate shapes before calling in.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let f = rhs.get(k, j);
                if f == 0.0 {
                    continue;
                }
                let lhs = self.col(k);
                let oc = out.col_mut(j);
                for r in 0..self.rows {
                    oc[r] += lhs[r] * f;
                }
            }
        }
        out
    }

    /// `self^T * rhs` without forming the transpose.
    pub fn t_mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_mul shape");
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for j in 0..rhs.cols {
            for i in 0..self.cols {
                out.set(i, j, dot(self.col(i), rhs.col(j)));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for c in 0..self.cols {
            for r in 0..self.rows {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn scaled(&self, f: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= f;
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape");
        let mut out = self.clone();
        for (v, w) in out.data.iter_mut().zip(&rhs.data) {
            *v += *w;
        }
        out
    }

    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "diff shape");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest absolute deviation of `self^T self` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.t_mul(self);
        let mut worst = 0.0f64;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `m = u * diag(sigma) * v^T` with
/// `sigma` sorted descending and non-negative. `u` is `rows x cols`
/// with orthonormal columns (completed deterministically when `m` is
/// rank deficient) and `v` is `cols x cols` orthogonal.
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD: rotates column pairs of a working copy until
/// every pair is orthogonal, accumulating the rotations into `v`.
/// Needs `rows >= cols`, which holds everywhere in this crate.
pub fn jacobi_svd(m: &Matrix) -> Svd {
    assert!(m.rows() >= m.cols(), "jacobi_svd expects rows >= cols");
    let n = m.cols();
    let mut w = m.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let c = dot(w.col(i), w.col(j));
                off += c.abs();
                if c.abs() <= JACOBI_TOL {
                    continue;
                }
                let a = dot(w.col(i), w.col(i));
                let b = dot(w.col(j), w.col(j));
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_pair(&mut w, i, j, cs, sn);
                rotate_pair(&mut v, i, j, cs, sn);
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm(w.col(j))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut u = Matrix::zeros(m.rows(), n);
    let mut sigma = vec![0.0; n];
    let mut v_sorted = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        if norms[src] > JACOBI_TOL {
            let inv = 1.0 / norms[src];
            let (wc, uc) = (w.col(src), u.col_mut(dst));
            for r in 0..wc.len() {
                uc[r] = wc[r] * inv;
            }
        }
    }
    complete_zero_columns(&mut u, &sigma);
    Svd { u, sigma, v: v_sorted }
}

/// Applies the plane rotation `[ci; cj] <- [ci, cj] * [[cs, sn], [-sn, cs]]`
/// to columns `i` and `j`.
fn rotate_pair(m: &mut Matrix, i: usize, j: usize, cs: f64, sn: f64) {
    for r in 0..m.rows() {
        let a = m.get(r, i);
        let b = m.get(r, j);
        m.set(r, i, cs * a - sn * b);
        m.set(r, j, sn * a + cs * b);
    }
}

/// Fills columns whose singular value vanished with unit vectors
/// orthogonal to the rest, picked deterministically from the identity.
fn complete_zero_columns(u: &mut Matrix, sigma: &[f64]) {
    for j in 0..sigma.len() {
        if sigma[j] > JACOBI_TOL {
            continue;
        }
        let mut filled = false;
        for cand in 0..u.rows() {
            let mut v = vec![0.0; u.rows()];
            v[cand] = 1.0;
            for k in 0..sigma.len() {
                if k == j {
                    continue;
                }
                let r = dot(&v, u.col(k));
                for (x, y) in v.iter_mut().zip(u.col(k)) {
                    *x -= r * y;
                }
            }
            let nrm = norm(&v);
            if nrm > 0.5 {
                let inv = 1.0 / nrm;
                for (dst, x) in u.col_mut(j).iter_mut().zip(&v) {
                    *dst = x * inv;
                }
                filled = true;
                break;
            }
        }
        assert!(filled, "could not complete orthonormal column");
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi
/// rotations. Returns `(values, vectors)` with eigenvalues sorted
/// descending and eigenvectors in the matching columns, each with its
/// largest-magnitude entry made positive so the decomposition is
/// deterministic.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert_eq!(a.rows(), a.cols(), "sym_eigen expects a square matrix");
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).abs();
            }
        }
        if off <= JACOBI_TOL {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= JACOBI_TOL / (n * n) as f64 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // Two-sided update: m <- J^T m J with J the rotation in
                // the (p, q) plane.
                for r in 0..n {
                    let mrp = m.get(r, p);
                    let mrq = m.get(r, q);
                    m.set(r, p, cs * mrp - sn * mrq);
                    m.set(r, q, sn * mrp + cs * mrq);
                }
                for c in 0..n {
                    let mpc = m.get(p, c);
                    let mqc = m.get(q, c);
                    m.set(p, c, cs * mpc - sn * mqc);
                    m.set(q, c, sn * mpc + cs * mqc);
                }
                rotate_pair(&mut v, p, q, cs, sn);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    order.sort_by(|&a, &b| diag[b].partial_cmp(&diag[a]).unwrap());

    let mut values = vec![0.0; n];
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = diag[src];
        vectors.col_mut(dst).copy_from_slice(v.col(src));
        fix_column_sign(&mut vectors, dst);
    }
    (values, vectors)
}

/// Sign convention: the entry with the largest magnitude in the column
/// is made positive (first occurrence wins on ties).
fn fix_column_sign(m: &mut Matrix, c: usize) {
    let col = m.col(c);
    let mut lead = 0usize;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[lead].abs() {
            lead = i;
        }
    }
    if col[lead] < 0.0 {
        for v in m.col_mut(c) {
            *v = -*v;
        }
    }
}

/// Determinant of a small square matrix by LU with partial pivoting.
pub fn determinant(m: &Matrix) -> f64 {
    assert_eq!(m.rows(), m.cols(), "determinant expects a square matrix");
    let n = m.rows();
    match n {
        0 => return 1.0,
        1 => return m.get(0, 0),
        2 => return m.get(0, 0) * m.get(1, 1) - m.get(0, 1) * m.get(1, 0),
        _ => {}
    }
    let mut a = m.clone();
    let mut det = 1.0f64;
    for k in 0..n {
        let mut piv = k;
        for r in (k + 1)..n {
            if a.get(r, k).abs() > a.get(piv, k).abs() {
                piv = r;
            }
        }
        if a.get(piv, k) == 0.0 {
            return 0.0;
        }
        if piv != k {
            for c in 0..n {
                let tmp = a.get(k, c);
                a.set(k, c, a.get(piv, c));
                a.set(piv, c, tmp);
            }
            det = -det;
        }
        let pivot = a.get(k, k);
        det *= pivot;
        for r in (k + 1)..n {
            let f = a.get(r, k) / pivot;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a.set(r, c, a.get(r, c) - f * a.get(k, c));
            }
        }
    }
    det
}
