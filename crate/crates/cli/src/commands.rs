//! Subcommand definitions and handlers. Handlers return the process exit code.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mopg::algorithm::{run, RunConfig, RunTrace, Termination};
use mopg::linalg::dist;
use mopg::merit::U0Method;
use mopg::problem::validate_problem;
use mopg::problems::{BenchmarkEntry, BenchmarkRegistry, Regime, Theorem};
use mopg::rates::{self, estimate_tau, Pl, RateCheck, RateRegistry, TAU_SAMPLES};
use mopg::subproblem::SolverPath;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::plot::{self, Scale, Series};
use crate::problem_file::{self, ProblemFile};
use crate::results::ResultsDocument;
use crate::trace_csv;

#[derive(Parser, Debug)]
#[command(name = "mopg", version, about = "Multiobjective proximal gradient experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the method on a benchmark or problem file.
    Run(RunArgs),
    /// Check a rate bound against a saved run.
    Verify(VerifyArgs),
    /// Plot a metric from one or more results documents as SVG.
    Plot(PlotArgs),
    /// Run and verify the benchmark suite.
    Bench(BenchArgs),
    /// Write a benchmark's declarative problem file.
    Export(ExportArgs),
    /// List benchmark families and the canonical suite.
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum U0Arg {
    ClosedForm,
    Ascent,
    Grid,
}

impl From<U0Arg> for U0Method {
    fn from(a: U0Arg) -> Self {
        match a {
            U0Arg::ClosedForm => U0Method::ClosedForm,
            U0Arg::Ascent => U0Method::ConcaveAscent,
            U0Arg::Grid => U0Method::GridBruteForce,
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Benchmark id (e.g. `biquad1`) or path to a problem file.
    #[arg(long)]
    pub problem: String,
    /// Start point as comma-separated values, or `random` (seeded, inside the test box).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Fixed step parameter; with `--adaptive`, the initial value. Defaults to 2L.
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub record_u0: bool,
    #[arg(long)]
    pub record_w1: bool,
    #[arg(long, value_enum)]
    pub u0_method: Option<U0Arg>,
    /// Force a subproblem solver path by name (e.g. `primal_fallback`).
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
    /// Print one line per iteration to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// nonconvex, convex, strong or pl.
    #[arg(long)]
    pub bound: String,
    /// PL constant, or `auto` to estimate it.
    #[arg(long)]
    pub tau: Option<String>,
    /// Where to write the updated document; defaults to `--results`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    U0,
    W1,
    Dist,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub results: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long, value_enum, default_value_t = Scale::Semilog)]
    pub scale: Scale,
    /// Overlay the theoretical bound.
    #[arg(long)]
    pub bound: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// `all`, or one of nonconvex, convex, strong, pl.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Plot(a) => cmd_plot(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Export(a) => cmd_export(&a),
        Command::List => cmd_list(),
    }
}

fn parse_x0(arg: Option<&str>, entry: &BenchmarkEntry, seed: u64) -> Result<Vec<f64>> {
    let p = &entry.spec;
    let x0 = match arg {
        None => entry.canonical.x0.clone(),
        Some("random") => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tb = p.test_box();
            let (lo, hi) = match p.domain_box() {
                Some((dl, dh)) => (
                    tb.lower.iter().zip(&dl).map(|(a, b)| a.max(*b)).collect::<Vec<_>>(),
                    tb.upper.iter().zip(&dh).map(|(a, b)| a.min(*b)).collect::<Vec<_>>(),
                ),
                None => (tb.lower.clone(), tb.upper.clone()),
            };
            lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect()
        }
        Some(s) => s
            .split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad x0 component {t:?}")))
            .collect::<Result<Vec<_>>>()?,
    };
    if x0.len() != p.n() {
        bail!("x0 has {} components but the problem has dimension {}", x0.len(), p.n());
    }
    Ok(x0)
}

fn run_config(a: &RunArgs, entry: &BenchmarkEntry) -> Result<RunConfig> {
    let l = entry.spec.lipschitz();
    let mut cfg = if a.adaptive {
        RunConfig::adaptive(a.ell.unwrap_or(1.0), a.max_iters)
    } else {
        RunConfig::fixed(a.ell.unwrap_or(2.0 * l), a.max_iters)
    };
    cfg.stop_tol = a.tol;
    cfg.record_u0 = a.record_u0;
    cfg.record_w1 = a.record_w1;
    cfg.seed = a.seed;
    cfg.u0_method = a.u0_method.map(U0Method::from);
    if let Some(name) = &a.solver {
        let path = SolverPath::from_name(name).ok_or_else(|| {
            let known: Vec<_> = SolverPath::ALL.iter().map(|p| p.name()).collect();
            anyhow!("unknown solver path {name:?}; known: {}", known.join(", "))
        })?;
        cfg.solver.path_override = Some(path);
    }
    cfg.validate(&entry.spec)?;
    Ok(cfg)
}

pub fn cmd_run(a: &RunArgs) -> Result<i32> {
    let (entry, file) = problem_file::resolve(&a.problem)?;
    let x0 = parse_x0(a.x0.as_deref(), &entry, a.seed)?;
    let cfg = run_config(a, &entry)?;
    let trace = run(&entry.spec, &x0, &cfg)?;
    if a.verbose {
        for r in &trace.records {
            eprintln!(
                "k={:<5} ell={:<8} |d|={:<12.5e} w_ell={:<12.5e} path={}",
                r.k,
                r.ell_used,
                r.norm_d,
                r.w_ell,
                r.solver_path.name()
            );
        }
    }
    let last = trace.records.last();
    println!(
        "{}: {:?} after {} iterations, |d| = {:e}",
        entry.id,
        trace.termination,
        trace.iterations(),
        last.map_or(f64::NAN, |r| r.norm_d)
    );
    if let Some(msg) = &trace.failure {
        eprintln!("solver failure: {msg}");
    }
    if let Some(path) = &a.trace_csv {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        trace_csv::write_trace(&trace, BufWriter::new(f))?;
    }
    let failed = trace.termination == Termination::SolverFailure;
    if let Some(path) = &a.out {
        ResultsDocument::new(file, x0, trace, a.seed).write(path)?;
    }
    Ok(if failed { 1 } else { 0 })
}

/// Whether a bound applies to a regime at all.
pub fn bound_allowed(t: Theorem, regime: Regime) -> bool {
    match t {
        Theorem::NonconvexW1 => true,
        Theorem::ConvexU0 => matches!(regime, Regime::Convex | Regime::StronglyConvex),
        Theorem::StronglyConvexLinear => regime == Regime::StronglyConvex,
        Theorem::PlLinear => matches!(regime, Regime::StronglyConvex | Regime::ProximalPL),
    }
}

fn parse_bound(name: &str) -> Result<Theorem> {
    Theorem::from_bound_name(name)
        .ok_or_else(|| anyhow!("unknown bound {name:?}; expected nonconvex, convex, strong or pl"))
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::NonconvexBoundedBelow => "nonconvex",
        Regime::Convex => "convex",
        Regime::StronglyConvex => "strongly_convex",
        Regime::ProximalPL => "proximal_pl",
    }
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let theorem = parse_bound(&a.bound)?;
    let mut doc = ResultsDocument::read(&a.results)?;
    let entry = problem_file::load(&doc.problem)?;
    if !bound_allowed(theorem, entry.regime) {
        bail!(
            "bound {} does not apply to {} (regime {})",
            a.bound,
            entry.id,
            regime_name(entry.regime)
        );
    }
    let report = if theorem == Theorem::PlLinear {
        let tau = match a.tau.as_deref() {
            Some("auto") => None,
            Some(s) => Some(s.parse::<f64>().with_context(|| format!("bad --tau {s:?}"))?),
            None => entry.ground_truth().tau,
        };
        let tau = match tau {
            Some(t) => t,
            None => {
                let xs: Vec<Vec<f64>> = doc.trace.records.iter().map(|r| r.x.clone()).collect();
                let est = estimate_tau(&entry.spec, &xs, TAU_SAMPLES, doc.environment.seed)?;
                let t = est.tau_hat;
                doc.tau_estimate = Some(est);
                t
            }
        };
        rates::check_pl(&doc.trace, &entry, tau)?
    } else {
        RateRegistry::builtin().check(theorem, &doc.trace, &entry)?
    };
    let ok = report.is_ok();
    println!("{}", describe_report(&report));
    doc.merge_report(report);
    doc.write(a.out.as_ref().unwrap_or(&a.results))?;
    Ok(if ok { 0 } else { 1 })
}

pub fn describe_report(r: &rates::RateReport) -> String {
    let mut s = format!(
        "{} {}: {} checks, {} violations",
        r.problem_id,
        r.theorem.bound_name(),
        r.per_k_bound.len() + r.cumulative_bound.len(),
        r.violations.len() + r.cumulative_violations.len()
    );
    if let Some(q) = r.factor {
        s += &format!(", factor {q:.8}");
    }
    if let Some(t) = r.tau {
        s += &format!(", tau {t:.6}");
    }
    if let Some(f) = &r.empirical_rate {
        s += &format!(", empirical {} {:.4}", rate_prefix(f.model), f.parameter);
    }
    s
}

fn rate_prefix(m: rates::RateModel) -> &'static str {
    match m {
        rates::RateModel::PowerLaw => "exponent",
        rates::RateModel::Geometric => "factor",
    }
}

fn metric_series(doc: &ResultsDocument, entry: &BenchmarkEntry, metric: Metric) -> Result<Vec<(f64, f64)>> {
    let t = &doc.trace;
    let pick = |f: fn(&mopg::algorithm::IterateRecord) -> Option<f64>, flag: &str| -> Result<Vec<(f64, f64)>> {
        t.records
            .iter()
            .map(|r| {
                f(r).map(|v| (r.k as f64, v))
                    .ok_or_else(|| anyhow!("{} was run without {flag}", doc.problem_id))
            })
            .collect()
    };
    match metric {
        Metric::U0 => pick(|r| r.u0, "--record-u0"),
        Metric::W1 => pick(|r| r.w1, "--record-w1"),
        Metric::Dist => {
            let (xstar, _) = rates::reference_limit(&entry.spec, t)?;
            Ok(t.records.iter().map(|r| (r.k as f64, dist(&r.x, &xstar))).collect())
        }
    }
}

fn bound_series(
    doc: &ResultsDocument,
    entry: &BenchmarkEntry,
    metric: Metric,
    scale: Scale,
    observed: &[(f64, f64)],
) -> Result<Vec<(f64, f64)>> {
    let t = &doc.trace;
    let ell = t.config.ell0;
    let ks: Vec<f64> = (0..=t.iterations()).map(|k| k as f64).collect();
    let first = observed.first().map_or(0.0, |p| p.1);
    let gt = entry.ground_truth();
    match metric {
        Metric::U0 => {
            let convex = bound_allowed(Theorem::ConvexU0, entry.regime)
                .then(|| gt.r_constant.as_ref().and_then(|r| r(&doc.x0)))
                .flatten();
            let tau = doc
                .reports
                .iter()
                .find_map(|r| r.tau)
                .or(gt.tau)
                .filter(|_| bound_allowed(Theorem::PlLinear, entry.regime));
            let geometric = tau.map(|tau| ks.iter().map(|k| (*k, first * (1.0 - tau / ell).powf(*k))).collect());
            let power = convex.map(|r| ks.iter().skip(1).map(|k| (*k, ell * r / (2.0 * k))).collect());
            let (a, b) = match scale {
                Scale::Semilog => (geometric, power),
                Scale::Loglog => (power, geometric),
            };
            a.or(b).ok_or_else(|| anyhow!("no u0 bound is available for {}", entry.id))
        }
        Metric::W1 => {
            let f_min = gt.f_min.ok_or_else(|| anyhow!("{} has no known F^min", entry.id))?;
            let f0 = t.records[0].f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = (f0 - f_min) * t.max_ell().max(1.0);
            Ok(ks.iter().skip(1).map(|k| (*k, scale / k)).collect())
        }
        Metric::Dist => {
            if entry.regime != Regime::StronglyConvex {
                bail!("no distance bound for {} (not strongly convex)", entry.id);
            }
            let q = rates::strong_factor(ell, entry.spec.mu(), entry.spec.nu());
            Ok(ks.iter().map(|k| (*k, first * q.powf(*k))).collect())
        }
    }
}

pub fn cmd_plot(a: &PlotArgs) -> Result<i32> {
    let metric_name = match a.metric {
        Metric::U0 => "u0",
        Metric::W1 => "w1",
        Metric::Dist => "|x^k - x*|",
    };
    let mut series = Vec::new();
    for path in &a.results {
        let doc = ResultsDocument::read(path)?;
        if doc.trace.iterations() == 0 {
            bail!("{} has an empty trace; nothing to plot", path.display());
        }
        let entry = problem_file::load(&doc.problem)?;
        let observed = metric_series(&doc, &entry, a.metric)?;
        if a.bound {
            let b = bound_series(&doc, &entry, a.metric, a.scale, &observed)?;
            series.push(Series {
                label: format!("{} bound", doc.problem_id),
                points: b,
                dashed: true,
            });
        }
        series.push(Series {
            label: doc.problem_id.clone(),
            points: observed,
            dashed: false,
        });
    }
    let svg = plot::render(&series, a.scale, metric_name, &format!("{metric_name} by iteration"))
        .ok_or_else(|| anyhow!("no positive {metric_name} values to plot"))?;
    std::fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(0)
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub problem: String,
    pub regime: Regime,
    pub iterations: usize,
    pub final_w: f64,
    pub checks: Vec<(Theorem, bool)>,
    pub empirical: String,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.1)
    }
}

fn bench_one(entry: &BenchmarkEntry, only: Option<Theorem>, seed: u64, out_dir: Option<&Path>) -> BenchRow {
    let mut row = BenchRow {
        problem: entry.id.clone(),
        regime: entry.regime,
        iterations: 0,
        final_w: f64::NAN,
        checks: Vec::new(),
        empirical: String::new(),
        error: None,
    };
    let result = (|| -> Result<()> {
        let v = validate_problem(&entry.spec, 200, seed);
        if let Some(f) = v.failures.first() {
            bail!("validation failed ({:?}): {}", f.check, f.detail);
        }
        let mut cfg = entry.canonical.config.clone();
        cfg.seed = seed;
        let trace: RunTrace = run(&entry.spec, &entry.canonical.x0, &cfg)?;
        if let Some(msg) = &trace.failure {
            bail!("solver failure: {msg}");
        }
        row.iterations = trace.iterations();
        row.final_w = trace.records.last().map_or(f64::NAN, |r| r.w_ell);
        let mut doc = ResultsDocument::new(problem_file::export(entry), entry.canonical.x0.clone(), trace, seed);
        let rates = RateRegistry::builtin();
        let pl = Pl { tau: None, seed };
        let mut fits = Vec::new();
        for &t in entry.theorems.iter().filter(|t| only.is_none_or(|o| o == **t)) {
            let report = if t == Theorem::PlLinear {
                pl.check(&doc.trace, entry)?
            } else {
                rates.check(t, &doc.trace, entry)?
            };
            row.checks.push((t, report.is_ok()));
            if let Some(f) = &report.empirical_rate {
                fits.push(format!("{} {} {:.3}", t.bound_name(), rate_prefix(f.model), f.parameter));
            }
            doc.merge_report(report);
        }
        row.empirical = fits.join("; ");
        if let Some(dir) = out_dir {
            doc.write(&dir.join(format!("{}.json", entry.id)))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(format!("{e:#}"));
    }
    row
}

/// Runs and verifies entries in parallel; rows come back in input order.
pub fn bench_entries(entries: &[BenchmarkEntry], only: Option<Theorem>, seed: u64, out_dir: Option<&Path>) -> Vec<BenchRow> {
    entries
        .par_iter()
        .map(|e| bench_one(e, only, seed, out_dir))
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut s = format!(
        "{:<10} {:<16} {:>6} {:>12}  {:<28} {}\n",
        "problem", "regime", "iters", "final w_l", "bounds", "empirical rate"
    );
    for r in rows {
        let bounds = match &r.error {
            Some(e) => format!("FAIL ({e})"),
            None => r
                .checks
                .iter()
                .map(|(t, ok)| format!("{}:{}", t.bound_name(), if *ok { "OK" } else { "FAIL" }))
                .collect::<Vec<_>>()
                .join(" "),
        };
        s += &format!(
            "{:<10} {:<16} {:>6} {:>12.3e}  {:<28} {}\n",
            r.problem,
            regime_name(r.regime),
            r.iterations,
            r.final_w + 0.0,
            bounds,
            r.empirical
        );
    }
    s
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let only = match a.suite.as_str() {
        "all" => None,
        s => Some(parse_bound(s).map_err(|_| anyhow!("unknown suite {s:?}; expected all, nonconvex, convex, strong or pl"))?),
    };
    let entries: Vec<BenchmarkEntry> = BenchmarkRegistry::builtin()
        .suite()?
        .into_iter()
        .filter(|e| only.is_none_or(|t| e.supports(t)))
        .collect();
    if let Some(dir) = &a.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let rows = bench_entries(&entries, only, a.seed, a.out_dir.as_deref());
    print!("{}", format_table(&rows));
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", rows.len());
        return Ok(1);
    }
    Ok(0)
}

pub fn cmd_export(a: &ExportArgs) -> Result<i32> {
    let (_, file): (_, ProblemFile) = problem_file::resolve(&a.problem)?;
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(&a.out, text).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(0)
}

pub fn cmd_list() -> Result<i32> {
    let reg = BenchmarkRegistry::builtin();
    println!("families: {}", reg.family_names().collect::<Vec<_>>().join(", "));
    for e in reg.suite()? {
        let ts: Vec<_> = e.theorems.iter().map(|t| t.bound_name()).collect();
        println!("{:<10} {:<16} bounds: {}", e.id, regime_name(e.regime), ts.join(", "));
    }
    Ok(0)
}
