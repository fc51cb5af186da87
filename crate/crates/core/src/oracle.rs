//! The attacker/target boundary. Every call into the target goes through a
//! metered query here.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::TwoLayerNet;

/// Step used by [`FiniteDiffConfig::default`].
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// SmoothGrad sample count used by [`SmoothGradConfig::default`].
pub const DEFAULT_SMOOTHGRAD_SAMPLES: usize = 10;

/// Counts of value and gradient queries. Counters only ever grow.
#[derive(Debug, Default)]
pub struct QueryLedger {
    value_queries: AtomicU64,
    gradient_queries: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub value_queries: u64,
    pub gradient_queries: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value_queries(&self) -> u64 {
        self.value_queries.load(Ordering::SeqCst)
    }

    pub fn gradient_queries(&self) -> u64 {
        self.gradient_queries.load(Ordering::SeqCst)
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            value_queries: self.value_queries(),
            gradient_queries: self.gradient_queries(),
        }
    }

    fn record_value(&self) {
        self.value_queries.fetch_add(1, Ordering::SeqCst);
    }

    fn record_gradient(&self) {
        self.gradient_queries.fetch_add(1, Ordering::SeqCst);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffConfig {
    pub eta: f64,
}

impl FiniteDiffConfig {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("finite-difference step {eta} must be positive")));
        }
        Ok(FiniteDiffConfig { eta })
    }
}

impl Default for FiniteDiffConfig {
    fn default() -> Self {
        FiniteDiffConfig { eta: DEFAULT_FD_STEP }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothGradConfig {
    /// Standard deviation of the Gaussian input noise.
    pub sigma: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl SmoothGradConfig {
    pub fn new(sigma: f64, n_samples: usize, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma={sigma} must be non-negative")));
        }
        if n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        Ok(SmoothGradConfig {
            sigma,
            n_samples,
            seed,
        })
    }
}

impl Default for SmoothGradConfig {
    fn default() -> Self {
        SmoothGradConfig {
            sigma: 0.0,
            n_samples: DEFAULT_SMOOTHGRAD_SAMPLES,
            seed: 0,
        }
    }
}

/// One membership query: `f(x)`.
pub fn query_value(net: &TwoLayerNet, x: &[f64], ledger: &QueryLedger) -> Result<f64> {
    let v = net.eval(x)?;
    ledger.record_value();
    Ok(v)
}

/// One gradient query: `∇f(x)`.
pub fn query_gradient(net: &TwoLayerNet, x: &[f64], ledger: &QueryLedger) -> Result<Vec<f64>> {
    let g = net.grad(x)?;
    ledger.record_gradient();
    Ok(g)
}

/// Forward-difference gradient from `d + 1` value queries; `f(x)` is queried
/// once and shared by every coordinate.
pub fn fd_gradient(
    net: &TwoLayerNet,
    x: &[f64],
    cfg: &FiniteDiffConfig,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    fd_gradient_with(|p| query_value(net, p, ledger), net.d(), x, cfg.eta)
}

pub(crate) fn fd_gradient_with<F>(mut value: F, d: usize, x: &[f64], eta: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_dim(d, x.len())?;
    let base = value(x)?;
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(d);
    for j in 0..d {
        probe[j] = x[j] + eta;
        // divide by the step actually taken after rounding x[j] + eta
        let step = probe[j] - x[j];
        g.push((value(&probe)? - base) / step);
        probe[j] = x[j];
    }
    Ok(g)
}

/// Average of `n_samples` exact gradients at `x + zᵢ`, `zᵢ ~ N(0, σ²I)`,
/// drawn from `cfg.seed`. Metered as a single gradient query.
pub fn smoothgrad(
    net: &TwoLayerNet,
    x: &[f64],
    cfg: &SmoothGradConfig,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    let g = smoothgrad_unmetered(net, x, cfg, cfg.seed)?;
    ledger.record_gradient();
    Ok(g)
}

fn smoothgrad_unmetered(net: &TwoLayerNet, x: &[f64], cfg: &SmoothGradConfig, seed: u64) -> Result<Vec<f64>> {
    check_dim(net.d(), x.len())?;
    if cfg.sigma == 0.0 {
        return net.grad(x);
    }
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; x.len()];
    let mut probe = vec![0.0; x.len()];
    for _ in 0..cfg.n_samples {
        for (p, xi) in probe.iter_mut().zip(x) {
            *p = xi + noise.sample(&mut rng);
        }
        for (a, g) in acc.iter_mut().zip(net.grad(&probe)?) {
            *a += g;
        }
    }
    let n = cfg.n_samples as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Which API the target exposes to the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Grad,
    Smoothgrad,
    Membership,
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::Grad => "grad",
            QueryMode::Smoothgrad => "smoothgrad",
            QueryMode::Membership => "membership",
        })
    }
}

impl FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grad" => Ok(QueryMode::Grad),
            "smoothgrad" => Ok(QueryMode::Smoothgrad),
            "membership" => Ok(QueryMode::Membership),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// A target network behind a metered query interface.
///
/// Value queries are always available. The gradient API depends on the mode:
/// exact gradients, SmoothGrad explanations, or nothing at all (membership
/// mode, where an attacker has to fall back to [`Oracle::fd_gradient`]).
#[derive(Debug)]
pub struct Oracle {
    net: TwoLayerNet,
    mode: QueryMode,
    smoothgrad: SmoothGradConfig,
    ledger: QueryLedger,
    smoothgrad_calls: AtomicU64,
}

impl Oracle {
    pub fn gradient_api(net: TwoLayerNet) -> Self {
        Self::build(net, QueryMode::Grad, SmoothGradConfig::default())
    }

    pub fn smoothgrad_api(net: TwoLayerNet, cfg: SmoothGradConfig) -> Self {
        Self::build(net, QueryMode::Smoothgrad, cfg)
    }

    pub fn membership_api(net: TwoLayerNet) -> Self {
        Self::build(net, QueryMode::Membership, SmoothGradConfig::default())
    }

    pub fn with_mode(net: TwoLayerNet, mode: QueryMode, cfg: SmoothGradConfig) -> Self {
        Self::build(net, mode, cfg)
    }

    fn build(net: TwoLayerNet, mode: QueryMode, smoothgrad: SmoothGradConfig) -> Self {
        Oracle {
            net,
            mode,
            smoothgrad,
            ledger: QueryLedger::new(),
            smoothgrad_calls: AtomicU64::new(0),
        }
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    /// Input dimension, which the attacker is assumed to know.
    pub fn dim(&self) -> usize {
        self.net.d()
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        query_value(&self.net, x, &self.ledger)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            QueryMode::Grad => query_gradient(&self.net, x, &self.ledger),
            QueryMode::Smoothgrad => {
                // each explanation call draws fresh noise from its own seed
                let call = self.smoothgrad_calls.fetch_add(1, Ordering::SeqCst);
                let seed = self.smoothgrad.seed ^ call.wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let g = smoothgrad_unmetered(&self.net, x, &self.smoothgrad, seed)?;
                self.ledger.record_gradient();
                Ok(g)
            }
            QueryMode::Membership => Err(Error::Configuration(
                "the target exposes no gradient API in membership mode".into(),
            )),
        }
    }

    /// Gradient estimate from `d + 1` value queries.
    pub fn fd_gradient(&self, x: &[f64], cfg: &FiniteDiffConfig) -> Result<Vec<f64>> {
        fd_gradient(&self.net, x, cfg, &self.ledger)
    }
}
