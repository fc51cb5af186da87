//! Ground-truth checks of recovered models and Monte Carlo checks of the
//! probability bounds the extraction parameters rest on.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{RecoveredModel, TwoLayerNet};
use crate::numerics::{dot, norm2, norm_inf, sub, DenseMatrix};
use crate::oracle::{fd_gradient, FiniteDiffConfig, QueryLedger};

/// Cosine gap below which two candidate rows count as indistinguishable.
pub const AMBIGUITY_TOL: f64 = 1e-9;
/// Samples per Monte Carlo block; each block owns one RNG stream.
const MC_BLOCK: usize = 1 << 16;
/// Consecutive rejections tolerated while sampling off-hyperplane points.
const REJECTION_LIMIT: usize = 100_000;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_vec<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n_points: usize,
    /// `max |f(x) − f̂(x)| / (1 + |f(x)|)` over the sample.
    pub max_rel_error: f64,
    /// No points were sampled, so the zero error says nothing.
    pub vacuous: bool,
}

impl EquivalenceReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Compares `f` and `f̂` on `n_points` standard Gaussian inputs.
pub fn functional_equivalence(
    net: &TwoLayerNet,
    model: &RecoveredModel,
    n_points: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    check_dim(net.d(), model.d())?;
    let d = net.d();
    let blocks = n_points.div_ceil(MC_BLOCK);
    let errors: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let mut rng = stream_rng(seed, b as u64);
            let n = MC_BLOCK.min(n_points - b * MC_BLOCK);
            let mut worst = 0.0f64;
            for _ in 0..n {
                let x = gaussian_vec(d, &mut rng);
                let f = net.eval(&x)?;
                let g = model.eval(&x)?;
                worst = worst.max((f - g).abs() / (1.0 + f.abs()));
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(EquivalenceReport {
        n_points,
        max_rel_error: errors.into_iter().fold(0.0, f64::max),
        vacuous: n_points == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `p[i]` is the row of `Z` matched to hidden unit `i`.
    pub p: Vec<usize>,
    pub signs: Vec<i8>,
    /// `maxᵢ ‖Z_{p(i)} − signsᵢ·wᵢ·Aᵢ‖∞`.
    pub max_row_error: f64,
}

/// Greedy assignment of recovered rows to hidden units by `|cosine|`.
pub fn match_rows(net: &TwoLayerNet, z: &DenseMatrix) -> Result<MatchResult> {
    let h = net.h();
    check_dim(h, z.rows())?;
    check_dim(net.d(), z.cols())?;
    let mut taken = vec![false; h];
    let mut p = Vec::with_capacity(h);
    let mut signs = Vec::with_capacity(h);
    let mut max_row_error = 0.0f64;
    for i in 0..h {
        let target = net.weighted_normal(i);
        let tn = norm2(&target);
        let mut best: Option<(usize, f64)> = None;
        let mut second = f64::NEG_INFINITY;
        for j in (0..h).filter(|&j| !taken[j]) {
            let row = z.row(j);
            let rn = norm2(row);
            let cos = if rn == 0.0 { 0.0 } else { (dot(row, &target) / (rn * tn)).abs() };
            match best {
                Some((_, bc)) if cos <= bc => second = second.max(cos),
                Some((_, bc)) => {
                    second = bc;
                    best = Some((j, cos));
                }
                None => best = Some((j, cos)),
            }
        }
        let (j, cos) = best.expect("an unassigned row remains for every unit");
        if cos - second <= AMBIGUITY_TOL {
            return Err(Error::AmbiguousMatch(format!(
                "unit {i}: two rows within {AMBIGUITY_TOL} cosine ({cos:.12} vs {second:.12})"
            )));
        }
        taken[j] = true;
        let neg: Vec<f64> = target.iter().map(|v| -v).collect();
        let e_pos = norm_inf(&sub(z.row(j), &target));
        let e_neg = norm_inf(&sub(z.row(j), &neg));
        let (sign, err) = if e_pos <= e_neg { (1, e_pos) } else { (-1, e_neg) };
        p.push(j);
        signs.push(sign);
        max_row_error = max_row_error.max(err);
    }
    Ok(MatchResult {
        p,
        signs,
        max_row_error,
    })
}

/// Outcome of one Monte Carlo bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub lemma: String,
    pub samples: u64,
    pub empirical_prob: f64,
    pub bound: f64,
    /// `empirical_prob ≤ bound + 3·sqrt(bound(1 − bound)/samples)`.
    pub passed: bool,
    /// The bound is at least 1 and cannot fail.
    pub vacuous: bool,
    /// Closed-form probability, where one is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    /// `|empirical − exact| ≤ 3·sqrt(exact(1 − exact)/samples)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_within_3sigma: Option<bool>,
}

impl McReport {
    fn new(lemma: &str, samples: u64, hits: u64, bound: f64, exact: Option<f64>) -> Self {
        let n = samples as f64;
        let empirical_prob = if samples == 0 { 0.0 } else { hits as f64 / n };
        let slack = if bound > 0.0 && bound < 1.0 { 3.0 * (bound * (1.0 - bound) / n).sqrt() } else { 0.0 };
        McReport {
            lemma: lemma.to_string(),
            samples,
            empirical_prob,
            bound,
            passed: empirical_prob <= bound + slack,
            vacuous: bound >= 1.0,
            exact,
            exact_within_3sigma: exact.map(|p| (empirical_prob - p).abs() <= three_sigma(p, n)),
        }
    }

    /// Bound check and, when present, the exact-law check.
    pub fn all_passed(&self) -> bool {
        self.passed && self.exact_within_3sigma != Some(false)
    }
}

fn three_sigma(p: f64, n: f64) -> f64 {
    3.0 * (p * (1.0 - p) / n).sqrt()
}

/// Counts hits over `samples` draws, split into fixed blocks with their own
/// RNG streams so the count does not depend on the thread pool.
fn count_hits<F>(samples: u64, seed: u64, hit: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let block = MC_BLOCK as u64;
    let blocks = samples.div_ceil(block);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let n = block.min(samples - b * block);
            (0..n).filter(|_| hit(&mut rng)).count() as u64
        })
        .sum()
}

/// Crossing parameters of two lines `⟨a,u + tv⟩ = 0`, `⟨b,u + tv⟩ = 0` with
/// `⟨a,b⟩ = 1 − c` fall within `ε` of each other with probability at most
/// `3^{4/3}(ε/c)^{2/3}`.
pub fn mc_crossing_gap(c: f64, epsilon: f64, samples: u64, seed: u64) -> Result<McReport> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidParameter(format!("c={c} must lie in (0, 1]")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon={epsilon} must be non-negative")));
    }
    let cos = 1.0 - c;
    let (b0, b1) = (cos, (1.0 - cos * cos).sqrt());
    let hits = count_hits(samples, seed, |rng| {
        let u: [f64; 2] = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let v: [f64; 2] = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let t1 = -u[0] / v[0];
        let t2 = -(b0 * u[0] + b1 * u[1]) / (b0 * v[0] + b1 * v[1]);
        (t1 - t2).abs() <= epsilon
    });
    let bound = 3f64.powf(4.0 / 3.0) * (epsilon / c).powf(2.0 / 3.0);
    Ok(McReport::new("crossing_gap", samples, hits, bound, None))
}

/// `t = −⟨a,u⟩/⟨a,v⟩` is standard Cauchy: `P(|t| ≥ l) = 1 − (2/π)·arctan(l) ≤ 2/(πl)`.
pub fn mc_cauchy_tail(l: f64, samples: u64, seed: u64) -> Result<McReport> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("l={l} must be positive")));
    }
    let hits = count_hits(samples, seed, |rng| {
        let a: f64 = StandardNormal.sample(rng);
        let b: f64 = StandardNormal.sample(rng);
        (a / b).abs() >= l
    });
    let bound = 2.0 / (PI * l);
    let exact = 1.0 - 2.0 / PI * l.atan();
    Ok(McReport::new("cauchy_tail", samples, hits, bound, Some(exact)))
}

/// For independent `Q, R ~ χ²₂`: `P(|Q − R| ≤ ε) = 1 − e^{−ε/2} ≤ ε`.
pub fn mc_chi2_diff(epsilon: f64, samples: u64, seed: u64) -> Result<McReport> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon={epsilon} must be non-negative")));
    }
    let hits = count_hits(samples, seed, |rng| {
        let g: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let q = g[0] * g[0] + g[1] * g[1];
        let r = g[2] * g[2] + g[3] * g[3];
        (q - r).abs() <= epsilon
    });
    let exact = 1.0 - (-epsilon / 2.0).exp();
    Ok(McReport::new("chi2_diff", samples, hits, epsilon, Some(exact)))
}

/// Raw moments `E[Z], E[Z²], E[Z³], E[Z⁴]`.
fn raw_moments(xs: &[f64]) -> [f64; 4] {
    let n = xs.len() as f64;
    let mut m = [0.0; 4];
    for &x in xs {
        let x2 = x * x;
        m[0] += x;
        m[1] += x2;
        m[2] += x2 * x;
        m[3] += x2 * x2;
    }
    m.map(|v| v / n)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut best = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub samples: usize,
    /// Raw moments of `XY`.
    pub product_moments: [f64; 4],
    /// Raw moments of `(Q − R)/2`.
    pub chi2_moments: [f64; 4],
    pub moments_ok: bool,
    pub ks_distance: f64,
    pub ks_threshold: f64,
    pub passed: bool,
}

impl ProductReport {
    /// The same result in the shape of the other lemma reports: the KS
    /// distance against its threshold.
    pub fn to_mc_report(&self) -> McReport {
        McReport {
            lemma: "gaussian_product".into(),
            samples: self.samples as u64,
            empirical_prob: self.ks_distance,
            bound: self.ks_threshold,
            passed: self.passed,
            vacuous: false,
            exact: None,
            exact_within_3sigma: None,
        }
    }
}

/// Threshold on the KS distance between `XY` and `(Q − R)/2` samples.
pub const KS_THRESHOLD: f64 = 0.01;
/// Moments of `XY` for independent standard Gaussians.
const PRODUCT_MOMENTS: [f64; 4] = [0.0, 1.0, 0.0, 9.0];
/// Standard deviations of the single-draw moment estimators: `sqrt(E[Z^{2k}] − E[Z^k]²)`.
const MOMENT_SD: [f64; 4] = [1.0, 2.828_427_124_746_19, 15.0, 104.613_574_549_363];

/// For independent standard Gaussians `X, Y` and `Q, R ~ χ²₁`, `XY` and
/// `(Q − R)/2` share a distribution.
pub fn mc_gaussian_product(samples: usize, seed: u64) -> Result<ProductReport> {
    if samples < 10_000 {
        return Err(Error::InvalidParameter(format!("samples={samples} must be at least 10^4")));
    }
    let chi1 = ChiSquared::new(1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let block = MC_BLOCK;
    let blocks = samples.div_ceil(block);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let n = block.min(samples - b * block);
            let mut xy = Vec::with_capacity(n);
            let mut qr = Vec::with_capacity(n);
            for _ in 0..n {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                xy.push(x * y);
                let q = chi1.sample(&mut rng);
                let r = chi1.sample(&mut rng);
                qr.push(0.5 * (q - r));
            }
            (xy, qr)
        })
        .collect();
    let (mut xy, mut qr) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for (a, b) in parts {
        xy.extend(a);
        qr.extend(b);
    }
    let pm = raw_moments(&xy);
    let cm = raw_moments(&qr);
    let n = samples as f64;
    let moments_ok = (0..4).all(|k| {
        let tol = 4.0 * MOMENT_SD[k] / n.sqrt();
        (pm[k] - PRODUCT_MOMENTS[k]).abs() <= tol && (cm[k] - PRODUCT_MOMENTS[k]).abs() <= tol
    });
    let ks = ks_distance(&xy, &qr);
    Ok(ProductReport {
        samples,
        product_moments: pm,
        chi2_moments: cm,
        moments_ok,
        ks_distance: ks,
        ks_threshold: KS_THRESHOLD,
        passed: moments_ok && ks <= KS_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCounterexample {
    pub x: Vec<f64>,
    pub estimate: Vec<f64>,
    pub exact: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdExactnessReport {
    pub trials: usize,
    pub mismatches: usize,
    /// `max ‖ĝ − g‖∞ / ‖g‖∞` over the trials.
    pub max_rel_error: f64,
    pub counterexample: Option<FdCounterexample>,
    pub passed: bool,
}

/// Relative agreement required between the forward-difference estimate and
/// the exact gradient.
pub const FD_EXACTNESS_TOL: f64 = 1e-9;

/// Samples Gaussian points at least `cfg.eta` from every hyperplane and
/// checks that the forward-difference gradient is the exact one.
pub fn check_fd_exactness(net: &TwoLayerNet, cfg: &FiniteDiffConfig, trials: usize, seed: u64) -> Result<FdExactnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ledger = QueryLedger::new();
    let mut mismatches = 0;
    let mut max_rel_error = 0.0f64;
    let mut counterexample = None;
    for _ in 0..trials {
        let mut rejected = 0;
        let x = loop {
            let x = gaussian_vec(net.d(), &mut rng);
            let margin = norm_inf_min(&net.pre_activations(&x)?);
            if margin > cfg.eta {
                break x;
            }
            rejected += 1;
            if rejected >= REJECTION_LIMIT {
                return Err(Error::Configuration(format!(
                    "no point with min|Ax| > {} after {REJECTION_LIMIT} draws",
                    cfg.eta
                )));
            }
        };
        let estimate = fd_gradient(net, &x, cfg, &ledger)?;
        let exact = net.grad(&x)?;
        let scale = norm_inf(&exact);
        let err = norm_inf(&sub(&estimate, &exact));
        let rel = if scale > 0.0 { err / scale } else { err };
        max_rel_error = max_rel_error.max(rel);
        if rel > FD_EXACTNESS_TOL {
            mismatches += 1;
            counterexample.get_or_insert(FdCounterexample { x, estimate, exact });
        }
    }
    Ok(FdExactnessReport {
        trials,
        mismatches,
        max_rel_error,
        counterexample,
        passed: mismatches == 0,
    })
}

fn norm_inf_min(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min)
}

/// Rate at which the probe grid `{u + iεv : |iε| ≤ l}` for fresh
/// `u, v ~ N(0, I)` passes within `eta` of some hyperplane, against the
/// bound `2lh·eta/ε`. Each grid is checked in closed form, row by row.
pub fn mc_probe_grid(net: &TwoLayerNet, l: f64, epsilon: f64, eta: f64, samples: u64, seed: u64) -> Result<McReport> {
    if !(l > 0.0 && epsilon > 0.0 && eta > 0.0) {
        return Err(Error::InvalidParameter("l, epsilon and eta must be positive".into()));
    }
    let d = net.d();
    let i_max = (l / epsilon).floor();
    let hits = count_hits(samples, seed, |rng| {
        let u = gaussian_vec(d, rng);
        let v = gaussian_vec(d, rng);
        (0..net.h()).any(|k| {
            let a = dot(net.a().row(k), &u);
            let b = dot(net.a().row(k), &v) * epsilon;
            // integers i in [−i_max, i_max] with |a + i·b| ≤ eta
            if b == 0.0 {
                return a.abs() <= eta;
            }
            let (lo, hi) = if b > 0.0 { ((-eta - a) / b, (eta - a) / b) } else { ((eta - a) / b, (-eta - a) / b) };
            let first = lo.ceil().max(-i_max);
            first <= hi.floor().min(i_max)
        })
    });
    let bound = 2.0 * l * net.h() as f64 * eta / epsilon;
    Ok(McReport::new("probe_grid", samples, hits, bound, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_random_net;

    fn identity_net(w: Vec<f64>) -> TwoLayerNet {
        TwoLayerNet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], w).unwrap()
    }

    #[test]
    fn ground_truth_is_equivalent() {
        let net = generate_random_net(10, 4, 0.1, 0.1, 3).unwrap();
        let model = RecoveredModel::from_ground_truth(&net, Some(&[true, false, true, false])).unwrap();
        let rep = functional_equivalence(&net, &model, 10_000, 1).unwrap();
        assert!(rep.max_rel_error <= 1e-12);
        assert!(!rep.vacuous);
    }

    #[test]
    fn flipped_sign_detected() {
        let net = generate_random_net(10, 4, 0.1, 0.1, 4).unwrap();
        let model = RecoveredModel::from_ground_truth(&net, None).unwrap();
        let mut s = model.s().to_vec();
        // move unit 2's sign into the negated slot
        let h = net.h();
        s.swap(2, h + 2);
        let bad = RecoveredModel::new(model.z().clone(), s).unwrap();
        let rep = functional_equivalence(&net, &bad, 10_000, 2).unwrap();
        assert!(rep.max_rel_error > 0.01, "{}", rep.max_rel_error);
    }

    #[test]
    fn zero_points_is_vacuous() {
        let net = identity_net(vec![1.0, 1.0]);
        let model = RecoveredModel::from_ground_truth(&net, None).unwrap();
        let rep = functional_equivalence(&net, &model, 0, 0).unwrap();
        assert_eq!(rep.max_rel_error, 0.0);
        assert!(rep.vacuous);
    }

    #[test]
    fn dimension_mismatch() {
        let net = identity_net(vec![1.0, 1.0]);
        let other = generate_random_net(3, 2, 0.1, 0.1, 0).unwrap();
        let model = RecoveredModel::from_ground_truth(&other, None).unwrap();
        assert!(matches!(
            functional_equivalence(&net, &model, 10, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn match_permuted_and_flipped() {
        let net = TwoLayerNet::from_rows(&[vec![0.6, 0.8], vec![1.0, 0.0]], vec![2.0, -0.5]).unwrap();
        let w1a1 = net.weighted_normal(0);
        let w2a2 = net.weighted_normal(1);

        let z = DenseMatrix::from_rows(&[w2a2.clone(), w1a1.clone()]).unwrap();
        let m = match_rows(&net, &z).unwrap();
        assert_eq!(m.p, vec![1, 0]);
        assert_eq!(m.signs, vec![1, 1]);
        assert_eq!(m.max_row_error, 0.0);

        let neg: Vec<f64> = w1a1.iter().map(|v| -v).collect();
        let z = DenseMatrix::from_rows(&[neg, w2a2]).unwrap();
        let m = match_rows(&net, &z).unwrap();
        assert_eq!(m.p, vec![0, 1]);
        assert_eq!(m.signs, vec![-1, 1]);
        assert_eq!(m.max_row_error, 0.0);
    }

    #[test]
    fn match_identity_example() {
        let net = identity_net(vec![1.0, -1.0]);
        let z = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let m = match_rows(&net, &z).unwrap();
        assert_eq!(m.p, vec![1, 0]);
        assert_eq!(m.signs, vec![1, 1]);
    }

    #[test]
    fn match_ambiguous() {
        let net = identity_net(vec![1.0, 1.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = DenseMatrix::from_rows(&[vec![r, r], vec![r, -r]]).unwrap();
        assert!(matches!(match_rows(&net, &z), Err(Error::AmbiguousMatch(_))));
    }

    #[test]
    fn gap_bound_value() {
        let rep = mc_crossing_gap(0.5, 1e-3, 100_000, 1).unwrap();
        assert!((rep.bound - 0.0687).abs() < 1e-4, "{}", rep.bound);
        assert!(rep.passed);
        let zero = mc_crossing_gap(0.5, 0.0, 10_000, 1).unwrap();
        assert_eq!(zero.empirical_prob, 0.0);
        assert!(zero.passed);
        let vac = mc_crossing_gap(0.9, 0.1, 1000, 1).unwrap();
        assert!(vac.vacuous && vac.passed);
    }

    #[test]
    fn cauchy_values() {
        let rep = mc_cauchy_tail(1.0, 200_000, 3).unwrap();
        assert!((rep.exact.unwrap() - 0.5).abs() < 1e-15);
        assert!((rep.bound - 2.0 / PI).abs() < 1e-15);
        assert!(rep.passed && rep.exact_within_3sigma == Some(true));
        let far = mc_cauchy_tail(1e6, 100_000, 3).unwrap();
        assert!(far.empirical_prob < 1e-4);
        assert!(mc_cauchy_tail(0.0, 10, 0).is_err());
    }

    #[test]
    fn chi2_values() {
        let rep = mc_chi2_diff(2.0, 200_000, 5).unwrap();
        assert!((rep.exact.unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!(rep.vacuous && rep.passed && rep.exact_within_3sigma == Some(true));
        assert_eq!(mc_chi2_diff(0.0, 10_000, 5).unwrap().empirical_prob, 0.0);
    }

    #[test]
    fn mc_is_deterministic() {
        let a = mc_chi2_diff(0.1, 300_000, 9).unwrap();
        let b = mc_chi2_diff(0.1, 300_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ks_distance_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
        assert!((ks_distance(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_law() {
        let rep = mc_gaussian_product(100_000, 2).unwrap();
        assert!(rep.moments_ok, "{rep:?}");
        assert!(rep.ks_distance <= KS_THRESHOLD);
        assert!(mc_gaussian_product(100, 0).is_err());
    }

    #[test]
    fn fd_hand_example() {
        let net = identity_net(vec![1.0, 1.0]);
        let ledger = QueryLedger::new();
        let g = fd_gradient(&net, &[1.0, 2.0], &FiniteDiffConfig::new(0.01).unwrap(), &ledger).unwrap();
        assert!(norm_inf(&sub(&g, &[1.0, 1.0])) <= 1e-12);
        let rep = check_fd_exactness(&net, &FiniteDiffConfig::new(0.01).unwrap(), 500, 1).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn fd_rejection_stalls() {
        let net = identity_net(vec![1.0, 1.0]);
        let err = check_fd_exactness(&net, &FiniteDiffConfig::new(1e3).unwrap(), 1, 0);
        assert!(matches!(err, Err(Error::Configuration(_))));
    }

    #[test]
    fn probe_grid_rate_matches_bound() {
        let net = identity_net(vec![1.0, 1.0]);
        let (l, eps) = (26.0, 7.76e-5);
        let eta = 0.1 * eps / (2.0 * 1.9 * l * 2.0);
        let rep = mc_probe_grid(&net, l, eps, eta, 200_000, 4).unwrap();
        assert!(rep.passed, "{rep:?}");
        // a larger step must raise the event rate
        let big = mc_probe_grid(&net, l, eps, 100.0 * eta, 200_000, 4).unwrap();
        assert!(big.empirical_prob > rep.empirical_prob);
    }
}
