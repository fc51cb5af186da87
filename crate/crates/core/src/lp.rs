//! Dense two-phase simplex for `max cᵀx s.t. Ax ≤ b, x ≥ 0`.
//!
//! Bland's rule is used for both the entering and the leaving variable, so
//! the method terminates on degenerate problems and is deterministic.

use crate::error::{check_dim, Result};
use crate::numerics::DenseMatrix;

const PIVOT_TOL: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// `(m + 1) × (ncols + 1)`; the last row holds reduced costs, the last
    /// column the right-hand side.
    t: DenseMatrix,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.ncols)]
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let width = self.ncols + 1;
        let inv = 1.0 / self.t[(p, q)];
        for j in 0..width {
            self.t[(p, j)] *= inv;
        }
        self.t[(p, q)] = 1.0;
        let pivot_row = self.t.row(p).to_vec();
        for i in 0..=self.m {
            if i == p {
                continue;
            }
            let factor = self.t[(i, q)];
            if factor == 0.0 {
                continue;
            }
            let row = self.t.row_mut(i);
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            row[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Runs simplex iterations on the current objective row. Columns at or
    /// beyond `allowed` never enter. Returns `false` when unbounded.
    fn optimize(&mut self, allowed: usize) -> bool {
        loop {
            let obj = self.m;
            let Some(q) = (0..allowed).find(|&j| self.t[(obj, j)] > PIVOT_TOL) else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[(i, q)];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                None => return false,
                Some((p, _)) => self.pivot(p, q),
            }
        }
    }
}

pub(crate) fn maximize(c: &[f64], a: &DenseMatrix, b: &[f64]) -> Result<LpOutcome> {
    let (m, n) = (a.rows(), a.cols());
    check_dim(n, c.len())?;
    check_dim(m, b.len())?;

    let negative: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    let k = negative.len();
    let ncols = n + m + k;
    let mut t = DenseMatrix::zeros(m + 1, ncols + 1);
    let mut basis = vec![0; m];
    let mut art = 0;
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = flip * a[(i, j)];
        }
        t[(i, n + i)] = flip;
        t[(i, ncols)] = flip * b[i];
        if flip < 0.0 {
            t[(i, n + m + art)] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { t, basis, m, ncols };

    if k > 0 {
        // phase one: maximize −Σ artificials, starting from the artificial basis
        for j in 0..=ncols {
            let mut v = if j >= n + m && j < ncols { -1.0 } else { 0.0 };
            for &i in &negative {
                v += tab.t[(i, j)];
            }
            tab.t[(m, j)] = v;
        }
        tab.optimize(ncols);
        if tab.t[(m, ncols)] > FEASIBILITY_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        // drive remaining (zero-valued) artificials out of the basis
        for i in 0..m {
            if tab.basis[i] >= n + m {
                if let Some(q) = (0..n + m).find(|&j| tab.t[(i, j)].abs() > PIVOT_TOL) {
                    tab.pivot(i, q);
                }
            }
        }
    }

    // phase two objective: reduced costs c_j − c_Bᵀ B⁻¹ A_j
    for j in 0..=ncols {
        tab.t[(m, j)] = 0.0;
    }
    for (j, &cj) in c.iter().enumerate() {
        tab.t[(m, j)] = cj;
    }
    for i in 0..m {
        let bv = tab.basis[i];
        if bv < n && c[bv] != 0.0 {
            let cb = c[bv];
            for j in 0..=ncols {
                let v = tab.t[(i, j)];
                tab.t[(m, j)] -= cb * v;
            }
        }
    }
    if !tab.optimize(n + m) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i);
        }
    }
    let objective = -tab.t[(m, ncols)];
    Ok(LpOutcome::Optimal { x, objective })
}
