//! Query points for sign recovery: a ball deep inside one cell of the
//! recovered hyperplane arrangement, clipped to the unit box, and `h` points
//! inside that ball on which `Z` acts with full rank.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lp::{maximize, LpOutcome};
use crate::numerics::{dot, norm2, DenseMatrix};

/// Balls with a smaller radius are treated as not fitting in the cell.
pub const MIN_RADIUS: f64 = 1e-9;
/// Relative tolerance for the greedy rank-revealing column selection.
pub const SELECTION_RANK_TOL: f64 = 1e-9;
/// Every entry of `ZX` must exceed this in magnitude.
pub const MIN_PREACTIVATION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevResult {
    pub y0: Vec<f64>,
    pub r: f64,
    /// `sgn⟨Zᵢ, v⟩` for the reference point `v` whose cell is used.
    pub cell_sign: Vec<i8>,
}

impl ChebyshevResult {
    /// Largest constraint slack violation; zero up to rounding for a valid ball.
    pub fn max_violation(&self, z: &DenseMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..z.rows() {
            let zi = z.row(i);
            let lhs = f64::from(self.cell_sign[i]) * dot(zi, &self.y0);
            worst = worst.max(self.r * norm2(zi) - lhs);
        }
        for &y in &self.y0 {
            worst = worst.max(self.r - y).max(y - (1.0 - self.r));
        }
        worst
    }

    /// Number of constraints tight within `tol`.
    pub fn tight_constraints(&self, z: &DenseMatrix, tol: f64) -> usize {
        let cell = (0..z.rows())
            .filter(|&i| {
                let zi = z.row(i);
                (f64::from(self.cell_sign[i]) * dot(zi, &self.y0) - self.r * norm2(zi)).abs() <= tol
            })
            .count();
        let boxed = self
            .y0
            .iter()
            .map(|&y| usize::from((y - self.r).abs() <= tol) + usize::from((1.0 - self.r - y).abs() <= tol))
            .sum::<usize>();
        cell + boxed
    }
}

/// Largest ball inside `{x : sgn⟨Zᵢ,v⟩·⟨Zᵢ,x⟩ > 0 ∀i} ∩ [0,1]^d`.
///
/// Solved as the LP `max r` subject to `sgnᵢ·⟨Zᵢ, y0⟩ ≥ r‖Zᵢ‖₂` and
/// `r ≤ y0_j ≤ 1 − r`.
pub fn chebyshev_center(z: &DenseMatrix, v: &[f64]) -> Result<ChebyshevResult> {
    let (h, d) = (z.rows(), z.cols());
    check_dim(d, v.len())?;
    let mut cell_sign = Vec::with_capacity(h);
    let mut norms = Vec::with_capacity(h);
    for i in 0..h {
        let n = norm2(z.row(i));
        if n == 0.0 {
            return Err(Error::Geometry(format!("row {i} of Z is zero")));
        }
        let side = dot(z.row(i), v);
        if side == 0.0 {
            return Err(Error::Geometry(format!("reference point lies on hyperplane {i}")));
        }
        cell_sign.push(if side > 0.0 { 1i8 } else { -1 });
        norms.push(n);
    }

    // variables (y0, r); rows: h cell constraints, d lower and d upper box faces
    let mut a = DenseMatrix::zeros(h + 2 * d, d + 1);
    let mut b = vec![0.0; h + 2 * d];
    for i in 0..h {
        let s = f64::from(cell_sign[i]);
        for j in 0..d {
            a[(i, j)] = -s * z[(i, j)] / norms[i];
        }
        a[(i, d)] = 1.0;
    }
    for j in 0..d {
        a[(h + j, j)] = -1.0;
        a[(h + j, d)] = 1.0;
        a[(h + d + j, j)] = 1.0;
        a[(h + d + j, d)] = 1.0;
        b[h + d + j] = 1.0;
    }
    let mut c = vec![0.0; d + 1];
    c[d] = 1.0;

    match maximize(&c, &a, &b)? {
        LpOutcome::Optimal { x, objective } => {
            if objective <= MIN_RADIUS {
                return Err(Error::Geometry(format!(
                    "cell meets the unit box only in a sliver (radius {objective:.3e})"
                )));
            }
            Ok(ChebyshevResult {
                y0: x[..d].to_vec(),
                r: x[d],
                cell_sign,
            })
        }
        LpOutcome::Infeasible => Err(Error::Geometry("Chebyshev LP infeasible".into())),
        LpOutcome::Unbounded => Err(Error::Geometry("Chebyshev LP unbounded".into())),
    }
}

/// `d×d` matrix whose column `i` is `y0 + (r/2)·eᵢ`.
pub fn build_candidate_points(res: &ChebyshevResult, d: usize) -> Result<DenseMatrix> {
    check_dim(d, res.y0.len())?;
    let mut y = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            y[(j, i)] = res.y0[j];
        }
        y[(i, i)] += res.r / 2.0;
    }
    Ok(y)
}

/// Picks `h` columns of `Y` with `rank(ZX) = h` by greedy pivoting on the
/// columns of `ZY` (largest residual norm first). Columns keep their order in `Y`.
pub fn select_full_rank_subset(z: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let zy = z.matmul(y)?;
    let h = z.rows();
    let candidates = zy.cols();
    if candidates < h {
        return Err(Error::Geometry(format!("{candidates} candidate points for {h} rows")));
    }
    let mut residual: Vec<Vec<f64>> = (0..candidates).map(|j| zy.column(j)).collect();
    let scale = residual.iter().map(|c| norm2(c)).fold(0.0, f64::max);
    let mut chosen = Vec::with_capacity(h);
    for _ in 0..h {
        let (best, norm) = (0..candidates)
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, norm2(&residual[j])))
            .fold((usize::MAX, -1.0), |acc, (j, n)| if n > acc.1 { (j, n) } else { acc });
        if best == usize::MAX || norm <= SELECTION_RANK_TOL * scale {
            return Err(Error::Geometry(format!(
                "rank(ZY) = {} < h = {h}; Z is rank deficient",
                chosen.len()
            )));
        }
        let q: Vec<f64> = residual[best].iter().map(|v| v / norm).collect();
        for (j, col) in residual.iter_mut().enumerate() {
            if j == best || chosen.contains(&j) {
                continue;
            }
            let proj = dot(&q, col);
            for (c, qi) in col.iter_mut().zip(&q) {
                *c -= proj * qi;
            }
        }
        chosen.push(best);
    }
    chosen.sort_unstable();

    let mut x = DenseMatrix::zeros(y.rows(), h);
    for (k, &j) in chosen.iter().enumerate() {
        for i in 0..y.rows() {
            x[(i, k)] = y[(i, j)];
        }
    }
    let zx = z.matmul(&x)?;
    if let Some(v) = zx.as_slice().iter().find(|v| v.abs() <= MIN_PREACTIVATION) {
        return Err(Error::Geometry(format!("selected point too close to a hyperplane (|ZX| = {v:.3e})")));
    }
    Ok(x)
}
