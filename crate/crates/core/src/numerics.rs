//! Small dense linear algebra: the handful of primitives the extraction
//! pipeline needs, with every tolerance named here.

use crate::error::{check_dim, Error, Result};

/// Residual bound for `solve_linear_system`, relative to `1 + ‖b‖∞`.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;
/// A pivot smaller than this times `‖M‖∞` makes the matrix singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-10;
/// Default relative pivot tolerance for numerical rank.
pub const RANK_TOL: f64 = 1e-9;

/// Row-major dense matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major storage.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "matrix shape must be positive, got {rows}x{cols}"
            )));
        }
        check_dim(rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for r in rows {
            check_dim(m, r.len())?;
            data.extend_from_slice(r);
        }
        Self::from_row_major(n, m, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Determinant by partial-pivoted elimination; 0 for exactly singular input.
    pub fn determinant(&self) -> Result<f64> {
        check_dim(self.rows, self.cols)?;
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
                .unwrap();
            if a[(p, k)] == 0.0 {
                return Ok(0.0);
            }
            if p != k {
                a.swap_rows(p, k);
                det = -det;
            }
            let pivot = a[(k, k)];
            det *= pivot;
            for i in k + 1..n {
                let factor = a[(i, k)] / pivot;
                for j in k..n {
                    a[(i, j)] -= factor * a[(k, j)];
                }
            }
        }
        Ok(det)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear_system(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    check_dim(n, m.cols())?;
    check_dim(n, b.len())?;

    let scale = m.norm_inf();
    let threshold = SINGULAR_PIVOT_TOL * scale;
    let mut a = m.clone();
    let mut rhs = b.to_vec();

    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs()))
            .unwrap();
        let pivot = a[(p, k)];
        if pivot.abs() < threshold || pivot == 0.0 {
            return Err(Error::SingularMatrix {
                pivot: pivot.abs(),
                threshold,
            });
        }
        a.swap_rows(p, k);
        rhs.swap(p, k);
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[(i, k)] = 0.0;
            for j in k + 1..n {
                a[(i, j)] -= factor * a[(k, j)];
            }
            rhs[i] -= factor * rhs[k];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let tail: f64 = (i + 1..n).map(|j| a[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - tail) / a[(i, i)];
    }
    Ok(x)
}

/// `‖M x − b‖∞`.
pub fn residual_inf(m: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<f64> {
    let mx = m.mul_vec(x)?;
    check_dim(mx.len(), b.len())?;
    Ok(norm_inf(&sub(&mx, b)))
}

/// Numerical rank: pivots of magnitude above `tol · ‖M‖∞` under complete
/// pivoting.
pub fn rank_with_tolerance(m: &DenseMatrix, tol: f64) -> usize {
    let threshold = tol * m.norm_inf();
    if threshold == 0.0 {
        return 0;
    }
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0);
        for i in k..rows {
            for jj in k..cols {
                let v = a[(i, col_perm[jj])].abs();
                if v > best.2 {
                    best = (i, jj, v);
                }
            }
        }
        if best.2 <= threshold {
            break;
        }
        a.swap_rows(k, best.0);
        col_perm.swap(k, best.1);
        let pc = col_perm[k];
        let pivot = a[(k, pc)];
        for i in k + 1..rows {
            let factor = a[(i, pc)] / pivot;
            for &c in &col_perm[k..] {
                let delta = factor * a[(k, c)];
                a[(i, c)] -= delta;
            }
        }
        rank += 1;
    }
    rank
}

/// Assembles the 2h×2h sign-recovery system
/// `[[max(ZX,0)ᵀ, max(−ZX,0)ᵀ], [max(−ZX,0)ᵀ, max(ZX,0)ᵀ]]`.
pub fn block_sign_matrix(zx: &DenseMatrix) -> Result<DenseMatrix> {
    let h = zx.rows();
    check_dim(h, zx.cols())?;
    if let Some(pos) = zx.as_slice().iter().position(|&v| v == 0.0) {
        return Err(Error::Validation(format!(
            "ZX has a zero entry at ({}, {})",
            pos / h,
            pos % h
        )));
    }
    let mut m = DenseMatrix::zeros(2 * h, 2 * h);
    for i in 0..h {
        for j in 0..h {
            // transposed blocks: row j of the system corresponds to column j of ZX
            let v = zx[(i, j)];
            let (pos, neg) = (v.max(0.0), (-v).max(0.0));
            m[(j, i)] = pos;
            m[(j, h + i)] = neg;
            m[(h + j, i)] = neg;
            m[(h + j, h + i)] = pos;
        }
    }
    Ok(m)
}
