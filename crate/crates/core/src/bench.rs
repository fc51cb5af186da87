//! Seeded trial batches: generate, extract, verify, record.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{learn_model, ExtractionConfig, DEFAULT_MAX_RETRIES};
use crate::model::{generate_random_net, DEFAULT_W_MIN};
use crate::oracle::{Oracle, QueryMode, SmoothGradConfig, DEFAULT_SMOOTHGRAD_SAMPLES};
use crate::validation::functional_equivalence;

/// Environment variable capping bench worker threads; `0` or unset means one
/// per core.
pub const THREADS_ENV: &str = "GRADLEAK_THREADS";
pub const CSV_HEADER: [&str; 9] = [
    "h",
    "d",
    "mode",
    "trial",
    "success",
    "gradient_queries",
    "value_queries",
    "max_rel_error",
    "seconds",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub h: usize,
    pub d: usize,
    pub mode: QueryMode,
    pub trial: usize,
    pub success: bool,
    pub gradient_queries: u64,
    pub value_queries: u64,
    /// NaN when extraction signalled failure.
    pub max_rel_error: f64,
    pub seconds: f64,
    /// Failed line attempts before the successful one.
    #[serde(skip)]
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub h_list: Vec<usize>,
    pub d: usize,
    pub trials: usize,
    pub mode: QueryMode,
    pub delta: f64,
    /// Collinearity gap assumed by the extractor.
    pub c: f64,
    /// Gap and weight floor used to generate targets.
    pub c_min: f64,
    pub w_min: f64,
    pub seed: u64,
    pub max_retries: usize,
    pub sigma: f64,
    pub n_samples: usize,
    pub verify_samples: usize,
    pub verify_tol: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            h_list: vec![2, 4, 8, 16],
            d: 32,
            trials: 20,
            mode: QueryMode::Grad,
            delta: 0.1,
            c: 0.01,
            c_min: 0.1,
            w_min: DEFAULT_W_MIN,
            seed: 0,
            max_retries: DEFAULT_MAX_RETRIES,
            sigma: 0.0,
            n_samples: DEFAULT_SMOOTHGRAD_SAMPLES,
            verify_samples: 100_000,
            verify_tol: 1e-7,
        }
    }
}

/// Seed for trial `trial` at width `h`. Independent of mode and dimension,
/// so runs that differ only in those are paired.
pub fn trial_seed(base: u64, h: usize, trial: usize) -> u64 {
    let mut z = base ^ ((h as u64) << 32 | trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One trial with its own target, oracle, ledger and RNG streams.
pub fn run_trial(cfg: &BenchConfig, h: usize, trial: usize) -> Result<BenchRecord> {
    let seed = trial_seed(cfg.seed, h, trial);
    let net = generate_random_net(cfg.d, h, cfg.c_min, cfg.w_min, seed)?;
    let sg = SmoothGradConfig::new(cfg.sigma, cfg.n_samples, seed)?;
    let oracle = Oracle::with_mode(net.clone(), cfg.mode, sg);
    let ecfg = ExtractionConfig::from_budget(h, cfg.delta, cfg.c, seed)?.with_max_retries(cfg.max_retries);

    let start = Instant::now();
    let outcome = learn_model(&oracle, &ecfg);
    let seconds = start.elapsed().as_secs_f64();
    let ledger = oracle.ledger().snapshot();
    let (success, max_rel_error, retries) = match outcome {
        Ok(report) => {
            let eq = functional_equivalence(&net, &report.recovered, cfg.verify_samples, seed)?;
            (eq.within(cfg.verify_tol), eq.max_rel_error, report.retries)
        }
        Err(Error::ExtractionFailure(_) | Error::SignRecovery(_) | Error::Geometry(_)) => {
            (false, f64::NAN, cfg.max_retries + 1)
        }
        Err(e) => return Err(e),
    };
    Ok(BenchRecord {
        h,
        d: cfg.d,
        mode: cfg.mode,
        trial,
        success,
        gradient_queries: ledger.gradient_queries,
        value_queries: ledger.value_queries,
        max_rel_error,
        seconds,
        retries,
    })
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) if s.trim().is_empty() => Ok(0),
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::Configuration(format!("{THREADS_ENV}={s} is not a thread count"))),
    }
}

/// All trials for every `h`, in `(h, trial)` order whatever the completion
/// order.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if cfg.h_list.is_empty() || cfg.trials == 0 {
        return Err(Error::InvalidParameter("h-list and trials must be non-empty".into()));
    }
    let jobs: Vec<(usize, usize)> = cfg
        .h_list
        .iter()
        .flat_map(|&h| (0..cfg.trials).map(move |t| (h, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    pool.install(|| jobs.par_iter().map(|&(h, t)| run_trial(cfg, h, t)).collect())
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.h.to_string(),
            r.d.to_string(),
            r.mode.to_string(),
            r.trial.to_string(),
            r.success.to_string(),
            r.gradient_queries.to_string(),
            r.value_queries.to_string(),
            r.max_rel_error.to_string(),
            format!("{:.6}", r.seconds),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `mean(gradient_queries) / (h·log₂(h/δ))` over retry-free successes.
pub fn normalized_query_mean(records: &[BenchRecord], h: usize, delta: f64) -> Option<f64> {
    let q: Vec<f64> = records
        .iter()
        .filter(|r| r.h == h && r.success)
        .map(|r| r.gradient_queries as f64)
        .collect();
    if q.is_empty() {
        return None;
    }
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    Some(mean / (h as f64 * (h as f64 / delta).log2()))
}
