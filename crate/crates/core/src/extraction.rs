//! The extraction attack.
//!
//! Hyperplanes are found by bisecting along a random line `u + t·v` for the
//! points where the gradient jumps; each jump is `±wᵢAᵢ`. Signs are then
//! resolved by a `2h × 2h` linear solve over value queries at points deep
//! inside one cell.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_candidate_points, chebyshev_center, select_full_rank_subset, ChebyshevResult};
use crate::model::RecoveredModel;
use crate::numerics::{block_sign_matrix, dot, norm2, norm_inf, residual_inf, solve_linear_system, sub, DenseMatrix};
use crate::oracle::{FiniteDiffConfig, LedgerSnapshot, Oracle, QueryMode};

/// Gradient-change threshold for exact gradient answers: `‖g₁ − g₂‖₂ > τ`.
pub const CHANGE_TOL: f64 = 1e-7;
/// Gradient-change threshold when gradients are forward-difference estimates.
pub const FD_CHANGE_TOL: f64 = 1e-2;
/// Floor on the forward-difference step relative to `‖x‖∞`. Below it the
/// rounding error of `f(x + ηeⱼ) − f(x)` swamps [`FD_CHANGE_TOL`].
pub const FD_RELATIVE_STEP: f64 = 1e-12;
/// Default number of redraws of `(u, v)` after a failed search.
pub const DEFAULT_MAX_RETRIES: usize = 5;
/// Distance to the nearest integer allowed when rounding the sign solve.
pub const SIGN_ROUNDING_TOL: f64 = 0.1;
/// Reference points tried before the cell geometry gives up.
const GEOMETRY_ATTEMPTS: usize = 32;
const ATTACK_SEED_TAG: u64 = 0x5a17_c0de_1ea4_0001;
/// Stream id reserved for the sign-recovery geometry; line attempts use 0, 1, ...
const GEOMETRY_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Assumed hidden width.
    pub h: usize,
    /// Failure probability budget.
    pub delta: f64,
    /// Assumed collinearity gap.
    pub c: f64,
    /// Bisection resolution in line parameter units.
    pub epsilon: f64,
    /// Half range of the searched line segment.
    pub l: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl ExtractionConfig {
    /// Configuration with `ε` and `l` from [`select_parameters`].
    pub fn from_budget(h: usize, delta: f64, c: f64, seed: u64) -> Result<Self> {
        let (epsilon, l) = select_parameters(delta, c, h)?;
        let cfg = ExtractionConfig {
            h,
            delta,
            c,
            epsilon,
            l,
            seed,
            max_retries: DEFAULT_MAX_RETRIES,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_retries(mut self, max_retries: usize) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(Error::InvalidParameter("h must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta={} must lie in (0, 1)", self.delta)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::InvalidParameter(format!("c={} must lie in (0, 1]", self.c)));
        }
        if !(self.epsilon > 0.0 && self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter("epsilon and l must be positive".into()));
        }
        if self.epsilon >= 2.0 * self.l {
            return Err(Error::InvalidParameter(format!(
                "epsilon={} must be below the segment length 2l={}",
                self.epsilon,
                2.0 * self.l
            )));
        }
        Ok(())
    }

    /// Upper bound on bisection steps per row: `⌈log₂(2l/ε)⌉`.
    pub fn steps_per_row(&self) -> u64 {
        (2.0 * self.l / self.epsilon).log2().ceil() as u64
    }

    /// `3h·⌈log₂(2l/ε)⌉ + 2h`, the gradient-query budget of a retry-free run.
    pub fn gradient_query_bound(&self) -> u64 {
        let h = self.h as u64;
        3 * h * self.steps_per_row() + 2 * h
    }

    /// Finite-difference step that makes all estimated gradients exact with
    /// probability `1 − δ/2`: `δε / (2(2 − δ)·l·h)`.
    pub fn membership_step(&self) -> f64 {
        self.delta * self.epsilon / (2.0 * (2.0 - self.delta) * self.l * self.h as f64)
    }
}

/// `(ε, l)` for a failure budget split evenly between two events: a
/// crossing outside `[−l, l]` (`l = max(h², ⌈4h/(πδ)⌉)`) and two crossings
/// closer than `ε` (`ε = c(δ/2)^{3/2} / (9h³)`).
pub fn select_parameters(delta: f64, c: f64, h: usize) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta={delta} must lie in (0, 1)")));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter(format!("c={c} must lie in (0, 1]")));
    }
    if h == 0 {
        return Err(Error::InvalidParameter("h must be at least 1".into()));
    }
    let hf = h as f64;
    let l = (hf * hf).max((4.0 * hf / (PI * delta)).ceil());
    let epsilon = c * (delta / 2.0).powf(1.5) / (9.0 * hf.powi(3));
    Ok((epsilon, l))
}

/// How the attacker obtains gradients from an oracle.
#[derive(Debug, Clone, Copy)]
pub struct GradientAccess<'a> {
    oracle: &'a Oracle,
    finite_diff: Option<FiniteDiffConfig>,
    change_tol: f64,
}

impl<'a> GradientAccess<'a> {
    /// Uses the oracle's gradient API (exact or SmoothGrad).
    pub fn api(oracle: &'a Oracle) -> Self {
        GradientAccess {
            oracle,
            finite_diff: None,
            change_tol: CHANGE_TOL,
        }
    }

    /// Estimates every gradient from `d + 1` value queries with step
    /// `max(cfg.eta, FD_RELATIVE_STEP·‖x‖∞)`.
    pub fn finite_diff(oracle: &'a Oracle, cfg: FiniteDiffConfig) -> Self {
        GradientAccess {
            oracle,
            finite_diff: Some(cfg),
            change_tol: FD_CHANGE_TOL,
        }
    }

    /// Picks the access the oracle's mode allows, with the membership step
    /// derived from `cfg`.
    pub fn for_config(oracle: &'a Oracle, cfg: &ExtractionConfig) -> Result<Self> {
        Ok(match oracle.mode() {
            QueryMode::Grad | QueryMode::Smoothgrad => Self::api(oracle),
            QueryMode::Membership => Self::finite_diff(oracle, FiniteDiffConfig::new(cfg.membership_step())?),
        })
    }

    pub fn with_change_tol(mut self, tol: f64) -> Self {
        self.change_tol = tol;
        self
    }

    pub fn oracle(&self) -> &'a Oracle {
        self.oracle
    }

    pub fn is_finite_diff(&self) -> bool {
        self.finite_diff.is_some()
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.finite_diff {
            None => self.oracle.gradient(x),
            Some(cfg) => {
                let eta = cfg.eta.max(FD_RELATIVE_STEP * norm_inf(x));
                self.oracle.fd_gradient(x, &FiniteDiffConfig { eta })
            }
        }
    }

    fn changed(&self, a: &[f64], b: &[f64]) -> bool {
        norm2(&sub(a, b)) > self.change_tol
    }
}

/// Final bisection bracket around one crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingBracket {
    pub t_left: f64,
    pub t_right: f64,
}

impl CrossingBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.t_left + self.t_right)
    }
}

/// The search line `u + t·v`, the crossings found on it so far, and a cache
/// of gradients keyed by `t`.
#[derive(Debug, Clone)]
pub struct LineProbe {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    crossings: Vec<CrossingBracket>,
    cache: HashMap<u64, Vec<f64>>,
}

impl LineProbe {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        LineProbe {
            u,
            v,
            crossings: Vec::new(),
            cache: HashMap::new(),
        }
    }

    /// `u, v ~ N(0, I_d)`.
    pub fn random<R: Rng>(d: usize, rng: &mut R) -> Self {
        let u = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let v = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        Self::new(u, v)
    }

    pub fn point(&self, t: f64) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(a, b)| a + t * b).collect()
    }

    pub fn crossings(&self) -> &[CrossingBracket] {
        &self.crossings
    }

    fn gradient_at(&mut self, access: &GradientAccess<'_>, t: f64) -> Result<Vec<f64>> {
        let key = t.to_bits();
        if let Some(g) = self.cache.get(&key) {
            return Ok(g.clone());
        }
        let g = access.gradient(&self.point(t))?;
        self.cache.insert(key, g.clone());
        Ok(g)
    }
}

/// Bisects `[t_lo, t_hi]` down to width `ε` around the first gradient change
/// above `t_lo`. Returns `∇f(x_r) − ∇f(x_l)` for the final bracket and its
/// right end, which is the floor for the next search.
pub fn binary_search_segment(
    access: &GradientAccess<'_>,
    probe: &mut LineProbe,
    t_lo: f64,
    t_hi: f64,
    epsilon: f64,
) -> Result<(Vec<f64>, f64)> {
    if t_hi.partial_cmp(&t_lo) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::ExtractionFailure(format!("empty search bracket [{t_lo}, {t_hi}]")));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    loop {
        let g_lo = probe.gradient_at(access, lo)?;
        let g_hi = probe.gradient_at(access, hi)?;
        if hi - lo <= epsilon {
            if !access.changed(&g_lo, &g_hi) {
                return Err(Error::ExtractionFailure(format!(
                    "no gradient change in final bracket [{lo}, {hi}]"
                )));
            }
            if let Some(last) = probe.crossings.last() {
                if lo < last.t_right {
                    return Err(Error::ExtractionFailure("crossings out of order".into()));
                }
            }
            probe.crossings.push(CrossingBracket { t_left: lo, t_right: hi });
            return Ok((sub(&g_hi, &g_lo), hi));
        }
        let mid = 0.5 * (lo + hi);
        let g_mid = probe.gradient_at(access, mid)?;
        if access.changed(&g_lo, &g_mid) {
            hi = mid;
        } else if access.changed(&g_mid, &g_hi) {
            lo = mid;
        } else {
            return Err(Error::ExtractionFailure(format!(
                "no gradient change in [{lo}, {hi}]"
            )));
        }
    }
}

/// Result of hyperplane recovery: rows of `Z` in crossing order.
#[derive(Debug, Clone)]
pub struct ZRecovery {
    pub z: DenseMatrix,
    pub probe: LineProbe,
    /// Failed attempts before the successful one.
    pub retries: usize,
}

/// One pass of `h` bisections along `probe`.
fn search_line(access: &GradientAccess<'_>, probe: &mut LineProbe, cfg: &ExtractionConfig) -> Result<DenseMatrix> {
    let d = access.oracle().dim();
    let mut z = DenseMatrix::zeros(cfg.h, d);
    let mut t_lo = -cfg.l;
    for i in 0..cfg.h {
        let (row, next) = binary_search_segment(access, probe, t_lo, cfg.l, cfg.epsilon)?;
        z.row_mut(i).copy_from_slice(&row);
        t_lo = next;
    }
    if access.is_finite_diff() {
        z = refine_rows(access, probe, &z, cfg.l)?;
    }
    Ok(z)
}

/// Re-estimates each row from gradients at points well inside the cells the
/// line passes through, with a step sized to the distance from every
/// recovered hyperplane. Removes the rounding noise of the tiny bisection
/// step; costs `(h + 1)(d + 1)` value queries.
fn refine_rows(access: &GradientAccess<'_>, probe: &LineProbe, coarse: &DenseMatrix, l: f64) -> Result<DenseMatrix> {
    let h = coarse.rows();
    let brackets = probe.crossings();
    let normals: Vec<Vec<f64>> = (0..h)
        .map(|i| {
            let n = norm2(coarse.row(i));
            coarse.row(i).iter().map(|v| v / n).collect()
        })
        .collect();

    let mut interior = Vec::with_capacity(h + 1);
    interior.push(brackets[0].t_left - 1.0);
    for k in 1..h {
        interior.push(0.5 * (brackets[k - 1].t_right + brackets[k].t_left));
    }
    interior.push(brackets[h - 1].t_right + 1.0);

    let mut cell_grads = Vec::with_capacity(h + 1);
    for &t in &interior {
        let p = probe.point(t);
        let margin = normals.iter().map(|n| dot(n, &p).abs()).fold(f64::INFINITY, f64::min);
        let cfg = FiniteDiffConfig::new(0.25 * margin)
            .map_err(|_| Error::ExtractionFailure(format!("cell interior point at t={t} sits on a hyperplane")))?;
        cell_grads.push(access.oracle().fd_gradient(&p, &cfg)?);
    }

    // the outermost cells must agree with the segment ends, otherwise a
    // crossing was missed or found twice
    for (grad, t) in [(&cell_grads[0], -l), (&cell_grads[h], l)] {
        if let Some(end) = probe.cache.get(&t.to_bits()) {
            if access.changed(grad, end) {
                return Err(Error::ExtractionFailure(format!("gradient at t={t} disagrees with its cell")));
            }
        }
    }

    let mut z = DenseMatrix::zeros(h, coarse.cols());
    for k in 0..h {
        let row = sub(&cell_grads[k + 1], &cell_grads[k]);
        if !access.changed(&row, &vec![0.0; row.len()]) {
            return Err(Error::ExtractionFailure(format!("row {k} vanishes between adjacent cells")));
        }
        let drift = norm2(&sub(&row, coarse.row(k)));
        if drift > 0.5 * norm2(coarse.row(k)) {
            return Err(Error::ExtractionFailure(format!(
                "row {k} disagrees between bisection and cell interior ({drift:.3e})"
            )));
        }
        z.row_mut(k).copy_from_slice(&row);
    }
    Ok(z)
}

/// Recovers `Z` with rows `±wᵢAᵢ` in crossing order, redrawing the line up to
/// `cfg.max_retries` times after a failure.
pub fn recover_z(access: &GradientAccess<'_>, cfg: &ExtractionConfig) -> Result<ZRecovery> {
    cfg.validate()?;
    let d = access.oracle().dim();
    let mut last_err = None;
    for attempt in 0..=cfg.max_retries {
        let mut rng = line_rng(cfg.seed, attempt as u64);
        let mut probe = LineProbe::random(d, &mut rng);
        match search_line(access, &mut probe, cfg) {
            Ok(z) => {
                return Ok(ZRecovery {
                    z,
                    probe,
                    retries: attempt,
                })
            }
            Err(e @ Error::ExtractionFailure(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let cause = last_err.map(|e| e.to_string()).unwrap_or_default();
    Err(Error::ExtractionFailure(format!(
        "{} attempts exhausted; last: {cause}",
        cfg.max_retries + 1
    )))
}

/// Attack randomness, domain-separated from anything else seeded with the
/// same number (such as the target generator).
fn line_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ATTACK_SEED_TAG);
    rng.set_stream(stream);
    rng
}

/// Output of the sign solve.
#[derive(Debug, Clone)]
pub struct SignSolution {
    pub s: Vec<i8>,
    /// Unrounded solution of `M s = b`.
    pub raw: Vec<f64>,
    /// `‖M·raw − b‖∞`.
    pub residual: f64,
    pub cell: ChebyshevResult,
    /// The `h` query points, one per column.
    pub points: DenseMatrix,
}

/// Reference point for the cell: uniform in the open unit box, so the cell
/// it selects always meets the box.
fn draw_reference<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(f64::EPSILON..1.0)).collect()
}

/// Builds `h` same-cell query points, queries `f(±xⱼ)` (2h value queries) and
/// solves for the sign vector.
pub fn recover_s(oracle: &Oracle, z: &DenseMatrix, seed: u64) -> Result<SignSolution> {
    let (h, d) = (z.rows(), z.cols());
    let mut rng = line_rng(seed, GEOMETRY_STREAM);
    let mut setup = None;
    let mut last_err = None;
    for _ in 0..GEOMETRY_ATTEMPTS {
        let v = draw_reference(d, &mut rng);
        let cell = match chebyshev_center(z, &v) {
            Ok(c) => c,
            Err(e @ Error::Geometry(_)) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let y = build_candidate_points(&cell, d)?;
        match select_full_rank_subset(z, &y) {
            Ok(x) => {
                setup = Some((cell, x));
                break;
            }
            Err(e @ Error::Geometry(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let Some((cell, x)) = setup else {
        return Err(last_err.unwrap_or_else(|| Error::Geometry("no usable cell".into())));
    };

    let zx = z.matmul(&x)?;
    let m = block_sign_matrix(&zx)?;
    let mut b = vec![0.0; 2 * h];
    for j in 0..h {
        let col = x.column(j);
        b[j] = oracle.value(&col)?;
        let neg: Vec<f64> = col.iter().map(|v| -v).collect();
        b[h + j] = oracle.value(&neg)?;
    }
    let raw = solve_linear_system(&m, &b).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::Geometry(format!("sign system is singular: {e}")),
        other => other,
    })?;
    let residual = residual_inf(&m, &raw, &b)?;

    let mut s = Vec::with_capacity(2 * h);
    for (i, &v) in raw.iter().enumerate() {
        let r = v.round();
        if (v - r).abs() > SIGN_ROUNDING_TOL || r.abs() > 1.0 {
            return Err(Error::SignRecovery(format!(
                "s[{i}] = {v:.6} is not within {SIGN_ROUNDING_TOL} of -1, 0 or 1"
            )));
        }
        s.push(r as i8);
    }
    RecoveredModel::new(z.clone(), s.clone()).map_err(|e| Error::SignRecovery(e.to_string()))?;
    Ok(SignSolution {
        s,
        raw,
        residual,
        cell,
        points: x,
    })
}

#[derive(Debug, Clone)]
pub struct ExtractionReport {
    pub recovered: RecoveredModel,
    pub ledger: LedgerSnapshot,
    pub retries: usize,
    pub crossings: Vec<CrossingBracket>,
}

impl ExtractionReport {
    pub fn to_file(&self) -> ReportFile {
        ReportFile {
            success: true,
            retries: self.retries,
            gradient_queries: self.ledger.gradient_queries,
            value_queries: self.ledger.value_queries,
            crossings: self.crossings.iter().map(CrossingBracket::midpoint).collect(),
        }
    }
}

/// On-disk report: `{success, retries, gradient_queries, value_queries, crossings}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub success: bool,
    pub retries: usize,
    pub gradient_queries: u64,
    pub value_queries: u64,
    pub crossings: Vec<f64>,
}

/// Full attack: hyperplanes, then signs.
pub fn learn_model(oracle: &Oracle, cfg: &ExtractionConfig) -> Result<ExtractionReport> {
    let access = GradientAccess::for_config(oracle, cfg)?;
    let zr = recover_z(&access, cfg)?;
    let signs = recover_s(oracle, &zr.z, cfg.seed)?;
    let recovered = RecoveredModel::new(zr.z, signs.s)?;
    Ok(ExtractionReport {
        recovered,
        ledger: oracle.ledger().snapshot(),
        retries: zr.retries,
        crossings: zr.probe.crossings().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TwoLayerNet;

    fn identity_oracle(w: Vec<f64>) -> Oracle {
        Oracle::gradient_api(TwoLayerNet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], w).unwrap())
    }

    #[test]
    fn parameter_examples() {
        let (eps, l) = select_parameters(0.1, 0.5, 2).unwrap();
        assert_eq!(l, 26.0);
        let expected = 0.5 * 0.05f64.powf(1.5) / 72.0;
        assert!((eps - expected).abs() < 1e-18);
        assert!((eps - 7.764e-5).abs() < 1e-8);

        let (eps, l) = select_parameters(0.5, 1.0, 1).unwrap();
        assert_eq!(l, 3.0);
        assert!((eps - 0.125 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_decreases_with_width() {
        let mut prev = f64::INFINITY;
        for h in 1..20 {
            let (eps, _) = select_parameters(0.1, 0.5, h).unwrap();
            assert!(eps < prev);
            prev = eps;
        }
    }

    #[test]
    fn budget_split_meets_delta() {
        for &(delta, c, h) in &[(0.1, 0.5, 2usize), (0.01, 0.1, 8), (0.5, 1.0, 1), (0.2, 0.01, 16)] {
            let (eps, l) = select_parameters(delta, c, h).unwrap();
            let hf = h as f64;
            let gap_term = 3f64.powf(4.0 / 3.0) * (eps / c).powf(2.0 / 3.0) * hf * hf;
            let tail_term = 2.0 / (PI * l) * hf;
            assert!(gap_term <= delta / 2.0 * (1.0 + 1e-12), "{gap_term}");
            assert!(tail_term <= delta / 2.0 * (1.0 + 1e-12), "{tail_term}");
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(select_parameters(0.0, 0.5, 2).is_err());
        assert!(select_parameters(1.0, 0.5, 2).is_err());
        assert!(select_parameters(0.1, 0.0, 2).is_err());
        assert!(select_parameters(0.1, 1.5, 2).is_err());
        assert!(select_parameters(0.1, 0.5, 0).is_err());
        let mut cfg = ExtractionConfig::from_budget(2, 0.1, 0.5, 0).unwrap();
        cfg.epsilon = 3.0 * cfg.l;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hand_worked_line() {
        // crossings: ⟨e₁, u + t v⟩ = 0 at t = 0.5, ⟨e₂, u + t v⟩ = 0 at t = 0.25
        let oracle = identity_oracle(vec![1.0, 1.0]);
        let access = GradientAccess::api(&oracle);
        let mut probe = LineProbe::new(vec![-0.5, -0.25], vec![1.0, 1.0]);
        let (first, next) = binary_search_segment(&access, &mut probe, -2.0, 2.0, 0.01).unwrap();
        assert_eq!(first, vec![0.0, 1.0]);
        assert!(next >= 0.25 && next - 0.25 <= 0.01);
        let (second, next2) = binary_search_segment(&access, &mut probe, next, 2.0, 0.01).unwrap();
        assert_eq!(second, vec![1.0, 0.0]);
        assert!(next2 >= 0.5 && next2 - 0.5 <= 0.01);
        assert_eq!(probe.crossings().len(), 2);
    }

    #[test]
    fn single_crossing_exact_row() {
        let oracle = Oracle::gradient_api(TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![2.0]).unwrap());
        let access = GradientAccess::api(&oracle);
        let mut probe = LineProbe::new(vec![-0.5, 3.0], vec![1.0, 0.0]);
        let (row, next) = binary_search_segment(&access, &mut probe, -2.0, 2.0, 0.01).unwrap();
        assert_eq!(row, vec![2.0, 0.0]);
        assert!((0.5..=0.51).contains(&next));
    }

    #[test]
    fn no_crossing_is_failure() {
        let oracle = identity_oracle(vec![1.0, 1.0]);
        let access = GradientAccess::api(&oracle);
        let mut probe = LineProbe::new(vec![1.0, 1.0], vec![1.0, 1.0]);
        // both coordinates stay positive on [0, 2]
        let err = binary_search_segment(&access, &mut probe, 0.0, 2.0, 0.01);
        assert!(matches!(err, Err(Error::ExtractionFailure(_))));
    }

    #[test]
    fn narrow_bracket_returns_immediately() {
        let oracle = identity_oracle(vec![1.0, 1.0]);
        let access = GradientAccess::api(&oracle);
        let mut probe = LineProbe::new(vec![-0.5, 5.0], vec![1.0, 0.0]);
        let (row, next) = binary_search_segment(&access, &mut probe, 0.499, 0.505, 0.01).unwrap();
        assert_eq!(row, vec![1.0, 0.0]);
        assert_eq!(next, 0.505);
        assert_eq!(oracle.ledger().gradient_queries(), 2);
    }

    #[test]
    fn gradients_are_cached_by_t() {
        let oracle = identity_oracle(vec![1.0, 1.0]);
        let access = GradientAccess::api(&oracle);
        let mut probe = LineProbe::new(vec![-0.5, -0.25], vec![1.0, 1.0]);
        binary_search_segment(&access, &mut probe, -2.0, 2.0, 0.01).unwrap();
        let steps = (4.0f64 / 0.01).log2().ceil() as u64;
        assert_eq!(oracle.ledger().gradient_queries(), steps + 2);
    }

    #[test]
    fn recover_s_examples() {
        let oracle = identity_oracle(vec![1.0, -1.0]);
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let sol = recover_s(&oracle, &z, 3).unwrap();
        assert_eq!(sol.s, vec![1, 0, 0, -1]);
        assert_eq!(oracle.ledger().value_queries(), 4);
        assert!(sol.residual <= 1e-12);

        let oracle = Oracle::gradient_api(TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![1.0]).unwrap());
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(recover_s(&oracle, &z, 0).unwrap().s, vec![1, 0]);
        assert_eq!(oracle.ledger().value_queries(), 2);
    }

    #[test]
    fn wrong_z_is_sign_error() {
        let oracle = identity_oracle(vec![1.0, -1.0]);
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.2, -1.0]]).unwrap();
        assert!(matches!(recover_s(&oracle, &z, 3), Err(Error::SignRecovery(_))));
    }

    #[test]
    fn learn_single_unit() {
        let net = TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![2.0]).unwrap();
        let oracle = Oracle::gradient_api(net.clone());
        let cfg = ExtractionConfig::from_budget(1, 0.1, 0.5, 11).unwrap();
        let report = learn_model(&oracle, &cfg).unwrap();
        let z = report.recovered.z().row(0);
        assert!((z[0].abs() - 2.0).abs() < 1e-7 && z[1].abs() < 1e-7);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..2).map(|_| StandardNormal.sample(&mut rng)).collect();
            let expect = 2.0 * x[0].max(0.0);
            assert!((report.recovered.eval(&x).unwrap() - expect).abs() <= 1e-7);
        }
    }

    #[test]
    fn wrong_width_fails_loudly() {
        let net = TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![2.0]).unwrap();
        let oracle = Oracle::gradient_api(net);
        let cfg = ExtractionConfig::from_budget(2, 0.1, 0.5, 1).unwrap();
        assert!(matches!(learn_model(&oracle, &cfg), Err(Error::ExtractionFailure(_))));
    }

    #[test]
    fn membership_single_unit() {
        let net = TwoLayerNet::from_rows(&[vec![0.6, 0.8]], vec![-1.5]).unwrap();
        let oracle = Oracle::membership_api(net.clone());
        let cfg = ExtractionConfig::from_budget(1, 0.1, 0.5, 2).unwrap();
        let report = learn_model(&oracle, &cfg).unwrap();
        let z = report.recovered.z().row(0);
        let expected = net.weighted_normal(0);
        let err = norm_inf(&sub(z, &expected)).min(norm_inf(&sub(z, &expected.iter().map(|v| -v).collect::<Vec<_>>())));
        assert!(err < 1e-9, "{z:?}");
        assert_eq!(report.ledger.gradient_queries, 0);
    }
}
