use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gradleak::bench::{run_bench, write_csv, BenchConfig};
use gradleak::extraction::{learn_model, ExtractionConfig, ReportFile};
use gradleak::model::{generate_random_net, RecoveredModel, TwoLayerNet};
use gradleak::oracle::{Oracle, QueryMode, SmoothGradConfig};
use gradleak::validation::{
    functional_equivalence, match_rows, mc_cauchy_tail, mc_chi2_diff, mc_crossing_gap, mc_gaussian_product, McReport,
};
use gradleak::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_EXTRACTION_FAILED: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "gradleak", version, about = "Recover two-layer ReLU networks from query access")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random target network
    Gen(GenArgs),
    /// Run the extraction attack against a model file
    Extract(ExtractArgs),
    /// Compare a recovered model with the target
    Verify(VerifyArgs),
    /// Monte Carlo checks of the probability bounds
    Lemmas(LemmaArgs),
    /// Batch of seeded generate/extract/verify trials, as CSV
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    d: usize,
    #[arg(long)]
    h: usize,
    #[arg(long, default_value_t = 0.1)]
    c_min: f64,
    #[arg(long, default_value_t = 0.1)]
    w_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grad,
    Smoothgrad,
    Membership,
}

impl From<ModeArg> for QueryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Grad => QueryMode::Grad,
            ModeArg::Smoothgrad => QueryMode::Smoothgrad,
            ModeArg::Membership => QueryMode::Membership,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "grad")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Collinearity gap assumed by the attack
    #[arg(long, default_value_t = 0.01)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_retries: usize,
    /// Assumed hidden width; defaults to the model file's
    #[arg(long)]
    h: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    n_samples: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    recovered: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Which {
    Gap,
    Tail,
    Chi2diff,
    Product,
    All,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long, value_enum, default_value = "all")]
    which: Which,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Gap width (default 1e-3) or chi-squared window (default 0.1)
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    l: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    h_list: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, value_enum, default_value = "grad")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Collinearity gap assumed by the attack
    #[arg(long, default_value_t = 0.01)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    c_min: f64,
    #[arg(long, default_value_t = 0.1)]
    w_min: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    max_retries: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    n_samples: usize,
    #[arg(long, default_value_t = 100_000)]
    verify_samples: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// CSV destination; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Lemmas(a) => cmd_lemmas(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_pretty<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(a: GenArgs) -> Result<u8> {
    if a.h > a.d {
        anyhow::bail!(
            "h={} > d={}: the hidden rows must be linearly independent, which needs h <= d",
            a.h,
            a.d
        );
    }
    let net = generate_random_net(a.d, a.h, a.c_min, a.w_min, a.seed)?;
    net.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let inv = net.check_invariants(a.c_min, a.w_min);
    print_json(&serde_json::to_value(inv)?)?;
    Ok(0)
}

fn cmd_extract(a: ExtractArgs) -> Result<u8> {
    let net = TwoLayerNet::load(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let h = a.h.unwrap_or(net.h());
    let sg = SmoothGradConfig::new(a.sigma, a.n_samples, a.seed)?;
    let oracle = Oracle::with_mode(net, a.mode.into(), sg);
    let cfg = ExtractionConfig::from_budget(h, a.delta, a.c, a.seed)?.with_max_retries(a.max_retries);
    match learn_model(&oracle, &cfg) {
        Ok(report) => {
            report.recovered.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
            let file = report.to_file();
            write_pretty(&a.report, &file)?;
            print_json(&serde_json::to_value(&file)?)?;
            Ok(0)
        }
        Err(e @ (Error::ExtractionFailure(_) | Error::SignRecovery(_) | Error::Geometry(_))) => {
            let ledger = oracle.ledger().snapshot();
            let file = ReportFile {
                success: false,
                retries: cfg.max_retries + 1,
                gradient_queries: ledger.gradient_queries,
                value_queries: ledger.value_queries,
                crossings: Vec::new(),
            };
            write_pretty(&a.report, &file)?;
            eprintln!("extraction failed: {e}");
            Ok(EXIT_EXTRACTION_FAILED)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let net = TwoLayerNet::load(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let rec = RecoveredModel::load(&a.recovered).with_context(|| format!("reading {}", a.recovered.display()))?;
    if net.d() != rec.d() {
        anyhow::bail!("dimension mismatch: model d={}, recovered d={}", net.d(), rec.d());
    }
    let eq = functional_equivalence(&net, &rec, a.samples, a.seed)?;
    let matched = if rec.h() == net.h() {
        match match_rows(&net, rec.z()) {
            Ok(m) => json!(m),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        json!({ "error": format!("width mismatch: model h={}, recovered h={}", net.h(), rec.h()) })
    };
    let ok = eq.within(a.tol);
    print_json(&json!({
        "max_rel_error": eq.max_rel_error,
        "samples": eq.n_points,
        "vacuous": eq.vacuous,
        "tol": a.tol,
        "equivalent": ok,
        "match": matched,
    }))?;
    Ok(if ok { 0 } else { EXIT_MISMATCH })
}

fn cmd_lemmas(a: LemmaArgs) -> Result<u8> {
    let run = |w: Which| a.which == Which::All || a.which == w;
    let mut reports: Vec<McReport> = Vec::new();
    if run(Which::Gap) {
        reports.push(mc_crossing_gap(a.c, a.epsilon.unwrap_or(1e-3), a.samples, a.seed)?);
    }
    if run(Which::Tail) {
        reports.push(mc_cauchy_tail(a.l, a.samples, a.seed)?);
    }
    if run(Which::Chi2diff) {
        reports.push(mc_chi2_diff(a.epsilon.unwrap_or(0.1), a.samples, a.seed)?);
    }
    if run(Which::Product) {
        let n = usize::try_from(a.samples).context("sample count")?;
        reports.push(mc_gaussian_product(n, a.seed)?.to_mc_report());
    }
    let mut all = true;
    for r in &reports {
        all &= r.all_passed();
        print_json(&serde_json::to_value(r)?)?;
    }
    Ok(if all { 0 } else { EXIT_USAGE })
}

fn cmd_bench(a: BenchArgs) -> Result<u8> {
    let cfg = BenchConfig {
        h_list: a.h_list,
        d: a.d,
        trials: a.trials,
        mode: a.mode.into(),
        delta: a.delta,
        c: a.c,
        c_min: a.c_min,
        w_min: a.w_min,
        seed: a.seed,
        max_retries: a.max_retries,
        sigma: a.sigma,
        n_samples: a.n_samples,
        verify_samples: a.verify_samples,
        verify_tol: a.tol,
    };
    if let Some(&h) = cfg.h_list.iter().find(|&&h| h > cfg.d) {
        anyhow::bail!("h={h} > d={}: the hidden rows must be linearly independent", cfg.d);
    }
    let records = run_bench(&cfg)?;
    match &a.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&records, BufWriter::new(f))?;
        }
        None => write_csv(&records, io::stdout().lock())?,
    }
    Ok(0)
}
