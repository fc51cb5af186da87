//! The target network family `f(x) = Σ wᵢ max(⟨Aᵢ, x⟩, 0)`, the recovered
//! representation `(Z, s)`, and a seeded instance generator.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numerics::{dot, norm2, rank_with_tolerance, DenseMatrix, RANK_TOL};

/// Tolerance on `‖Aᵢ‖₂ = 1`.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Default lower bound on `|wᵢ|` used by the generator.
pub const DEFAULT_W_MIN: f64 = 0.1;

const GENERATION_ATTEMPTS: usize = 100_000;

/// Ground-truth two-layer ReLU network without biases.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNet {
    a: DenseMatrix,
    w: Vec<f64>,
}

/// Activation pattern `𝕀{Ax ≥ 0}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellMask {
    pub bits: Vec<bool>,
}

impl CellMask {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| b as u8).collect()
    }
}

impl TwoLayerNet {
    /// Builds a network from an `h×d` weight matrix and `h` output weights.
    /// Only shapes and finiteness are checked; see [`TwoLayerNet::check_invariants`].
    pub fn new(a: DenseMatrix, w: Vec<f64>) -> Result<Self> {
        check_dim(a.rows(), w.len())?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("output weights must be finite".into()));
        }
        Ok(TwoLayerNet { a, w })
    }

    pub fn from_rows(rows: &[Vec<f64>], w: Vec<f64>) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?, w)
    }

    pub fn d(&self) -> usize {
        self.a.cols()
    }

    pub fn h(&self) -> usize {
        self.a.rows()
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// `wᵢ Aᵢ`, the vector a gradient jumps by when hyperplane `i` is crossed.
    pub fn weighted_normal(&self, i: usize) -> Vec<f64> {
        self.a.row(i).iter().map(|v| v * self.w[i]).collect()
    }

    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.a.mul_vec(x)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let z = self.pre_activations(x)?;
        Ok(z.iter().zip(&self.w).map(|(zi, wi)| wi * zi.max(0.0)).sum())
    }

    /// `Σ 𝕀{⟨Aᵢ,x⟩ ≥ 0} wᵢ Aᵢ`; the indicator is closed at zero.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mask = self.cell_mask(x)?;
        let mut g = vec![0.0; self.d()];
        for (i, active) in mask.bits.iter().enumerate() {
            if *active {
                let wi = self.w[i];
                for (gj, aij) in g.iter_mut().zip(self.a.row(i)) {
                    *gj += wi * aij;
                }
            }
        }
        Ok(g)
    }

    pub fn cell_mask(&self, x: &[f64]) -> Result<CellMask> {
        let z = self.pre_activations(x)?;
        Ok(CellMask {
            bits: z.iter().map(|&v| v >= 0.0).collect(),
        })
    }

    /// Checks unit rows, the collinearity gap, full row rank and `|wᵢ| ≥ w_min`.
    pub fn check_invariants(&self, c_min: f64, w_min: f64) -> InvariantReport {
        let h = self.h();
        let max_norm_error = (0..h)
            .map(|i| (norm2(self.a.row(i)) - 1.0).abs())
            .fold(0.0, f64::max);
        let mut max_abs_inner = 0.0f64;
        for i in 0..h {
            for j in i + 1..h {
                max_abs_inner = max_abs_inner.max(dot(self.a.row(i), self.a.row(j)).abs());
            }
        }
        let rank = rank_with_tolerance(&self.a, RANK_TOL);
        let min_abs_w = self.w.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        InvariantReport {
            unit_rows: max_norm_error <= UNIT_NORM_TOL,
            max_norm_error,
            collinearity_gap: max_abs_inner <= 1.0 - c_min,
            max_abs_inner,
            full_rank: rank == h,
            rank,
            weight_margin: min_abs_w >= w_min,
            min_abs_w,
        }
    }

    pub fn to_file(&self) -> NetFile {
        NetFile {
            d: self.d(),
            h: self.h(),
            a: self.a.to_rows(),
            w: self.w.clone(),
        }
    }

    pub fn from_file(file: NetFile) -> Result<Self> {
        if file.a.len() != file.h {
            return Err(Error::Validation(format!(
                "model declares h={} but A has {} rows",
                file.h,
                file.a.len()
            )));
        }
        let net = Self::from_rows(&file.a, file.w)?;
        if net.d() != file.d {
            return Err(Error::Validation(format!(
                "model declares d={} but A has {} columns",
                file.d,
                net.d()
            )));
        }
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_file(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InvariantReport {
    pub unit_rows: bool,
    pub max_norm_error: f64,
    pub collinearity_gap: bool,
    pub max_abs_inner: f64,
    pub full_rank: bool,
    pub rank: usize,
    pub weight_margin: bool,
    pub min_abs_w: f64,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.unit_rows && self.collinearity_gap && self.full_rank && self.weight_margin
    }
}

/// On-disk model format: `{"d", "h", "A", "w"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NetFile {
    pub d: usize,
    pub h: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

/// Extracted model `f̂(x) = [max(Zx,0)ᵀ max(−Zx,0)ᵀ]·s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredModel {
    z: DenseMatrix,
    s: Vec<i8>,
}

impl RecoveredModel {
    pub fn new(z: DenseMatrix, s: Vec<i8>) -> Result<Self> {
        let model = RecoveredModel { z, s };
        model.validate()?;
        Ok(model)
    }

    /// Builds `(Z, s)` from ground truth by the sign case table. Row `i` of `Z`
    /// is `wᵢAᵢ`, or `−wᵢAᵢ` where `flip[i]` is set.
    pub fn from_ground_truth(net: &TwoLayerNet, flip: Option<&[bool]>) -> Result<Self> {
        let h = net.h();
        if let Some(f) = flip {
            check_dim(h, f.len())?;
        }
        let mut z = DenseMatrix::zeros(h, net.d());
        let mut s = vec![0i8; 2 * h];
        for i in 0..h {
            let flipped = flip.is_some_and(|f| f[i]);
            let wi = if flipped { -net.w()[i] } else { net.w()[i] };
            for (zj, aj) in z.row_mut(i).iter_mut().zip(net.a().row(i)) {
                *zj = wi * aj;
            }
            let sign = if net.w()[i] >= 0.0 { 1 } else { -1 };
            // z = |w|A lands in the first block, z = −|w|A in the second
            if wi >= 0.0 {
                s[i] = sign;
            } else {
                s[h + i] = sign;
            }
        }
        Self::new(z, s)
    }

    pub fn d(&self) -> usize {
        self.z.cols()
    }

    pub fn h(&self) -> usize {
        self.z.rows()
    }

    pub fn z(&self) -> &DenseMatrix {
        &self.z
    }

    pub fn s(&self) -> &[i8] {
        &self.s
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.h();
        if self.s.len() != 2 * h {
            return Err(Error::Validation(format!(
                "sign vector has length {}, expected {}",
                self.s.len(),
                2 * h
            )));
        }
        if let Some(v) = self.s.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::Validation(format!("sign entry {v} not in {{-1,0,1}}")));
        }
        for i in 0..h {
            let (a, b) = (self.s[i] != 0, self.s[h + i] != 0);
            if a == b {
                return Err(Error::Validation(format!(
                    "unit {i}: exactly one of s[{i}], s[{}] must be nonzero",
                    h + i
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let zx = self.z.mul_vec(x)?;
        let h = self.h();
        Ok(zx
            .iter()
            .enumerate()
            .map(|(i, &v)| f64::from(self.s[i]) * v.max(0.0) + f64::from(self.s[h + i]) * (-v).max(0.0))
            .sum())
    }

    pub fn to_file(&self) -> RecoveredFile {
        RecoveredFile {
            d: self.d(),
            h: self.h(),
            z: self.z.to_rows(),
            s: self.s.clone(),
        }
    }

    pub fn from_file(file: RecoveredFile) -> Result<Self> {
        if file.z.len() != file.h {
            return Err(Error::Validation(format!(
                "recovered model declares h={} but Z has {} rows",
                file.h,
                file.z.len()
            )));
        }
        let z = DenseMatrix::from_rows(&file.z)?;
        if z.cols() != file.d {
            return Err(Error::Validation(format!(
                "recovered model declares d={} but Z has {} columns",
                file.d,
                z.cols()
            )));
        }
        Self::new(z, file.s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::from_file(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }
}

/// On-disk recovered format: `{"d", "h", "Z", "s"}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecoveredFile {
    pub d: usize,
    pub h: usize,
    #[serde(rename = "Z")]
    pub z: Vec<Vec<f64>>,
    pub s: Vec<i8>,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Draws a network satisfying unit rows, `|⟨Aᵢ,Aⱼ⟩| ≤ 1 − c_min`, full row
/// rank and `|wᵢ| ≥ w_min`. Deterministic in `seed`.
pub fn generate_random_net(
    d: usize,
    h: usize,
    c_min: f64,
    w_min: f64,
    seed: u64,
) -> Result<TwoLayerNet> {
    if h == 0 || d == 0 {
        return Err(Error::InvalidParameter("d and h must be positive".into()));
    }
    if h > d {
        return Err(Error::InvalidParameter(format!(
            "h={h} > d={d}: the {h} hidden rows cannot be linearly independent in dimension {d}"
        )));
    }
    if !(c_min > 0.0 && c_min < 1.0) {
        return Err(Error::InvalidParameter(format!("c_min={c_min} must lie in (0, 1)")));
    }
    if !(w_min > 0.0 && w_min.is_finite()) {
        return Err(Error::InvalidParameter(format!("w_min={w_min} must be positive")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    loop {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(h);
        while rows.len() < h {
            attempts += 1;
            if attempts > GENERATION_ATTEMPTS {
                return Err(Error::Generation(format!(
                    "no {h} rows in dimension {d} with pairwise |<a,b>| <= {} after {GENERATION_ATTEMPTS} draws",
                    1.0 - c_min
                )));
            }
            let mut row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm2(&row);
            if n == 0.0 {
                continue;
            }
            row.iter_mut().for_each(|v| *v /= n);
            if rows.iter().all(|r| dot(r, &row).abs() <= 1.0 - c_min) {
                rows.push(row);
            }
        }
        let a = DenseMatrix::from_rows(&rows)?;
        if rank_with_tolerance(&a, RANK_TOL) < h {
            continue;
        }
        let mut w = Vec::with_capacity(h);
        while w.len() < h {
            attempts += 1;
            if attempts > GENERATION_ATTEMPTS {
                return Err(Error::Generation("weight resampling budget exhausted".into()));
            }
            let v: f64 = StandardNormal.sample(&mut rng);
            if v.abs() >= w_min {
                w.push(v);
            }
        }
        return TwoLayerNet::new(a, w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn identity_net(w: Vec<f64>) -> TwoLayerNet {
        TwoLayerNet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], w).unwrap()
    }

    #[test]
    fn eval_examples() {
        let net = identity_net(vec![1.0, -1.0]);
        assert_eq!(net.eval(&[2.0, 3.0]).unwrap(), -1.0);
        assert_eq!(net.eval(&[0.0, 0.0]).unwrap(), 0.0);
        let single = TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![2.0]).unwrap();
        assert_eq!(single.eval(&[-5.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn grad_examples() {
        let net = identity_net(vec![1.0, -1.0]);
        assert_eq!(net.grad(&[2.0, 3.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(net.grad(&[2.0, -3.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(net.grad(&[-1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn boundary_gradient_is_closed() {
        let net = identity_net(vec![1.0, -1.0]);
        assert_eq!(net.grad(&[0.0, 0.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn cell_mask_examples() {
        let net = identity_net(vec![1.0, 1.0]);
        assert_eq!(net.cell_mask(&[2.0, -3.0]).unwrap().bits, vec![true, false]);
        assert_eq!(net.cell_mask(&[0.0, 0.0]).unwrap().bits, vec![true, true]);
        let single = TwoLayerNet::from_rows(&[vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(single.cell_mask(&[-1.0, 9.0]).unwrap().bits, vec![false]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = identity_net(vec![1.0, 1.0]);
        assert!(matches!(net.eval(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(net.grad(&[1.0, 2.0, 3.0]).is_err());
        assert!(net.cell_mask(&[]).is_err());
    }

    #[test]
    fn eval_recovered_examples() {
        let m = RecoveredModel::new(DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![1, 0]).unwrap();
        assert_eq!(m.eval(&[3.0, 5.0]).unwrap(), 3.0);
        assert_eq!(m.eval(&[0.0, 0.0]).unwrap(), 0.0);
        let m2 = RecoveredModel::new(
            DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap(),
            vec![1, 0, 0, -1],
        )
        .unwrap();
        assert_eq!(m2.eval(&[2.0, 3.0]).unwrap(), -1.0);
    }

    #[test]
    fn malformed_sign_vector_rejected() {
        let z = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        assert!(RecoveredModel::new(z.clone(), vec![1, 1]).is_err());
        assert!(RecoveredModel::new(z.clone(), vec![0, 0]).is_err());
        assert!(RecoveredModel::new(z.clone(), vec![2, 0]).is_err());
        assert!(RecoveredModel::new(z, vec![1]).is_err());
    }

    #[test]
    fn case_table_matches_target() {
        let net = identity_net(vec![1.0, -1.0]);
        let m = RecoveredModel::from_ground_truth(&net, None).unwrap();
        assert_eq!(m.s(), &[1, 0, 0, -1]);
        assert_eq!(m.z().row(1), &[0.0, -1.0]);
    }

    #[test]
    fn case_table_equivalence_random_points() {
        let net = generate_random_net(12, 5, 0.1, 0.1, 3).unwrap();
        let flips = [true, false, true, true, false];
        for flip in [None, Some(&flips[..])] {
            let m = RecoveredModel::from_ground_truth(&net, flip).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut rng)).collect();
                let f = net.eval(&x).unwrap();
                let g = m.eval(&x).unwrap();
                assert!((f - g).abs() <= 1e-9 * (1.0 + f.abs()));
            }
        }
    }

    #[test]
    fn generator_satisfies_invariants() {
        let net = generate_random_net(2, 2, 0.5, 0.1, 7).unwrap();
        assert!(net.check_invariants(0.5, 0.1).all_hold());
        let net = generate_random_net(20, 8, 0.1, 0.1, 1).unwrap();
        assert!(net.check_invariants(0.1, 0.1).all_hold());
    }

    #[test]
    fn generator_single_row() {
        let net = generate_random_net(10, 1, 0.1, 0.1, 0).unwrap();
        assert_eq!(net.h(), 1);
        assert!((norm2(net.a().row(0)) - 1.0).abs() <= UNIT_NORM_TOL);
        assert!(net.check_invariants(0.1, 0.1).full_rank);
    }

    #[test]
    fn generator_rejects_h_above_d() {
        assert!(matches!(
            generate_random_net(2, 3, 0.5, 0.1, 7),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn generator_infeasible_gap() {
        // random plane directions are essentially never orthogonal to within 1e-6
        assert!(matches!(
            generate_random_net(2, 2, 0.999_999, 0.1, 1),
            Err(Error::Generation(_))
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_random_net(6, 3, 0.1, 0.1, 42).unwrap();
        let b = generate_random_net(6, 3, 0.1, 0.1, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let net = generate_random_net(5, 3, 0.1, 0.1, 9).unwrap();
        let text = serde_json::to_string(&net.to_file()).unwrap();
        let back = TwoLayerNet::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn piecewise_linear_and_homogeneous() {
        let net = generate_random_net(8, 4, 0.1, 0.1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            let alpha: f64 = rng.random_range(0.01..100.0);
            let scaled: Vec<f64> = x.iter().map(|v| v * alpha).collect();
            let (fx, fs) = (net.eval(&x).unwrap(), net.eval(&scaled).unwrap());
            assert!((fs - alpha * fx).abs() <= 1e-9 * (1.0 + fs.abs()));

            let g = net.grad(&x).unwrap();
            let v: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            let t = 1e-6;
            let xt: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            if net.cell_mask(&xt).unwrap() == net.cell_mask(&x).unwrap() {
                let fd = (net.eval(&xt).unwrap() - fx) / t;
                let exact = dot(&g, &v);
                assert!((fd - exact).abs() <= 1e-4 * (1.0 + exact.abs()));
                let theta: f64 = rng.random_range(0.0..1.0);
                let mid: Vec<f64> = x.iter().zip(&xt).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
                let lin = theta * fx + (1.0 - theta) * net.eval(&xt).unwrap();
                assert!((net.eval(&mid).unwrap() - lin).abs() <= 1e-9 * (1.0 + lin.abs()));
            }
        }
    }
}
