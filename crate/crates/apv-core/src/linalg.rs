//! Minimal dense linear algebra: a column-major matrix and a least-squares
//! solver based on Householder QR with column pivoting.
//!
//! The solver never forms normal equations. Rank is decided column by
//! column: a column is dependent when its residual norm after projection
//! falls below `rel_tol` times its original norm, which makes the test
//! invariant to per-column scaling.

/// Relative rank tolerance on column norms used throughout the crate.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Dense column-major matrix.
#[derive(Debug, Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from equal-length column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "ragged columns");
            data.extend_from_slice(c);
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// X * v for a coefficient vector of length `cols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            let c = self.col(j);
            for (o, &x) in out.iter_mut().zip(c) {
                *o += vj * x;
            }
        }
        out
    }

    /// X^T * v for a vector of length `rows`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        (0..self.cols)
            .map(|j| dot(self.col(j), v))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of the pivoted-QR factorization.
pub enum Lstsq {
    Solved(Solution),
    /// Rank below the column count; `dependent` holds original indices of a
    /// column set whose removal restores full rank.
    RankDeficient { rank: usize, dependent: Vec<usize> },
}

/// Full-rank least-squares solution.
pub struct Solution {
    /// Coefficients in original column order.
    pub coef: Vec<f64>,
    /// Diagonal of (X^T X)^-1 in original column order.
    pub xtx_inv_diag: Vec<f64>,
}

struct PivotedQr {
    /// Transformed matrix; upper triangle of the leading block is R.
    r: Matrix,
    /// Householder vectors, one per processed column (length rows - k).
    reflectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
    /// perm[k] = original index of the column processed at step k.
    perm: Vec<usize>,
    rank: usize,
}

fn factorize(a: &Matrix, rel_tol: f64) -> PivotedQr {
    let (m, n) = (a.rows, a.cols);
    let mut r = a.clone();
    let orig_norm: Vec<f64> = (0..n).map(|j| norm(a.col(j))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let mut rank = n.min(m);

    for k in 0..n.min(m) {
        // Scale-invariant pivot: largest remaining-to-original norm ratio.
        let mut best = k;
        let mut best_ratio = -1.0;
        for j in k..n {
            let rem = norm(&r.col(j)[k..]);
            let orig = orig_norm[perm[j]];
            let ratio = if orig > 0.0 { rem / orig } else { 0.0 };
            if ratio > best_ratio {
                best_ratio = ratio;
                best = j;
            }
        }
        if best_ratio <= rel_tol {
            rank = k;
            break;
        }
        if best != k {
            perm.swap(k, best);
            for i in 0..m {
                let t = r.get(i, k);
                r.set(i, k, r.get(i, best));
                r.set(i, best, t);
            }
        }

        // Householder reflection annihilating r[k+1.., k].
        let col_norm = norm(&r.col(k)[k..]);
        let x0 = r.get(k, k);
        let alpha = if x0 >= 0.0 { -col_norm } else { col_norm };
        let mut v: Vec<f64> = r.col(k)[k..].to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let beta = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };

        r.set(k, k, alpha);
        for i in k + 1..m {
            r.set(i, k, 0.0);
        }
        for j in k + 1..n {
            let w = beta * dot(&v, &r.col(j)[k..]);
            let cj = &mut r.col_mut(j)[k..];
            for (c, &vi) in cj.iter_mut().zip(&v) {
                *c -= w * vi;
            }
        }
        reflectors.push(v);
        betas.push(beta);
    }

    PivotedQr {
        r,
        reflectors,
        betas,
        perm,
        rank,
    }
}

/// Indices (original order, ascending) of a maximal linearly independent
/// column subset under the relative tolerance.
pub fn independent_columns(a: &Matrix, rel_tol: f64) -> Vec<usize> {
    let qr = factorize(a, rel_tol);
    let mut keep: Vec<usize> = qr.perm[..qr.rank].to_vec();
    keep.sort_unstable();
    keep
}

/// Solve min ||A x - y||_2. Requires rows >= cols; detects rank deficiency.
pub fn lstsq(a: &Matrix, y: &[f64], rel_tol: f64) -> Lstsq {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "lstsq caller must reject under-determined systems");
    assert_eq!(y.len(), m);

    let qr = factorize(a, rel_tol);
    if qr.rank < n {
        let mut dependent: Vec<usize> = qr.perm[qr.rank..].to_vec();
        dependent.sort_unstable();
        return Lstsq::RankDeficient {
            rank: qr.rank,
            dependent,
        };
    }

    // Apply the stored reflections to y.
    let mut qty = y.to_vec();
    for (k, (v, &beta)) in qr.reflectors.iter().zip(&qr.betas).enumerate() {
        let w = beta * dot(v, &qty[k..]);
        for (q, &vi) in qty[k..].iter_mut().zip(v) {
            *q -= w * vi;
        }
    }

    // Back substitution on the leading n x n block of R.
    let mut z = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = qty[i];
        for (j, zj) in z.iter().enumerate().take(n).skip(i + 1) {
            s -= qr.r.get(i, j) * zj;
        }
        z[i] = s / qr.r.get(i, i);
    }

    // R^-1 (upper triangular), then diag((X^T X)^-1) = row sums of squares
    // of R^-1, mapped back through the permutation.
    let mut rinv = Matrix::zeros(n, n);
    for j in (0..n).rev() {
        rinv.set(j, j, 1.0 / qr.r.get(j, j));
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += qr.r.get(i, k) * rinv.get(k, j);
            }
            rinv.set(i, j, -s / qr.r.get(i, i));
        }
    }

    let mut coef = vec![0.0; n];
    let mut diag = vec![0.0; n];
    for k in 0..n {
        coef[qr.perm[k]] = z[k];
        diag[qr.perm[k]] = (k..n).map(|j| rinv.get(k, j).powi(2)).sum();
    }

    Lstsq::Solved(Solution {
        coef,
        xtx_inv_diag: diag,
    })
}
