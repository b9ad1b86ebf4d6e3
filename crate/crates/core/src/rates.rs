//! Global rate bounds checked against run traces, plus empirical rate fits.
//!
//! Each check compares an observed series with its theoretical bound at every `k` and
//! lists the indices where `observed > bound + slack`. Slack is relative (`1e-8` scale)
//! plus any certified `u_0` oracle gaps.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::{run, EllPolicy, IterateRecord, RunConfig, RunTrace, Termination};
use crate::error::{contract, Error, Result};
use crate::extreal;
use crate::linalg::{dist, norm};
use crate::merit::{self, U0Method};
use crate::problem::ProblemSpec;
pub use crate::problems::{BenchmarkEntry, Regime, Theorem};

/// Relative slack on every bound.
pub const REL_SLACK: f64 = 1e-8;
/// Iterates closer to `x*` than this are excluded from contraction checks.
pub const DIST_FLOOR: f64 = 1e-10;
/// Samples with `u_0` below this are excluded from the PL constant estimate.
pub const TAU_U0_FLOOR: f64 = 1e-10;
pub const TAU_SAMPLES: usize = 500;
const REFERENCE_ITERS: usize = 20_000;
const REFERENCE_TOL: f64 = 1e-12;
const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `value ~ c k^p`; the parameter is the exponent `p`.
    PowerLaw,
    /// `value ~ c q^k`; the parameter is the per-step factor `q`.
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    pub parameter: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in natural-log units.
    pub residual: f64,
    pub points: usize,
}

/// Least squares in log space. Nonpositive values (and `k = 0` for power laws) are dropped.
pub fn fit_rate(series: &[(usize, f64)], model: RateModel) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, v)| *v > 0.0 && v.is_finite() && (model == RateModel::Geometric || *k > 0))
        .map(|&(k, v)| {
            let t = match model {
                RateModel::PowerLaw => (k as f64).ln(),
                RateModel::Geometric => k as f64,
            };
            (t, v.ln())
        })
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(contract(format!(
            "rate fit needs {MIN_FIT_POINTS} positive values, got {}",
            pts.len()
        )));
    }
    let nf = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(contract("rate fit needs distinct k values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit {
        model,
        parameter: match model {
            RateModel::PowerLaw => slope,
            RateModel::Geometric => slope.exp(),
        },
        intercept,
        residual: (rss / nf).sqrt(),
        points: pts.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub k: usize,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub theorem: Theorem,
    pub problem_id: String,
    pub per_k_bound: Vec<BoundPoint>,
    /// Values of `k` in `per_k_bound` where the bound failed.
    pub violations: Vec<usize>,
    /// The `k`-power bound from `x^0`; only the strongly convex check fills it.
    #[serde(default)]
    pub cumulative_bound: Vec<BoundPoint>,
    #[serde(default)]
    pub cumulative_violations: Vec<usize>,
    pub empirical_rate: Option<RateFit>,
    /// Largest slack added to any bound.
    pub slack_used: f64,
    pub ell: f64,
    #[serde(default, with = "extreal::option")]
    pub factor: Option<f64>,
    #[serde(default, with = "extreal::option")]
    pub tau: Option<f64>,
    /// Set when the trace stopped at an exact fixed point and later `k` reuse its values.
    #[serde(default)]
    pub extended_to: Option<usize>,
}

impl RateReport {
    fn new(theorem: Theorem, trace: &RunTrace, ell: f64) -> Self {
        Self {
            theorem,
            problem_id: trace.problem_id.clone(),
            per_k_bound: Vec::new(),
            violations: Vec::new(),
            cumulative_bound: Vec::new(),
            cumulative_violations: Vec::new(),
            empirical_rate: None,
            slack_used: 0.0,
            ell,
            factor: None,
            tau: None,
            extended_to: None,
        }
    }

    fn push(&mut self, k: usize, observed: f64, bound: f64, slack: f64) {
        if observed > bound + slack {
            self.violations.push(k);
        }
        self.slack_used = self.slack_used.max(slack);
        self.per_k_bound.push(BoundPoint { k, observed, bound });
    }

    fn push_cumulative(&mut self, k: usize, observed: f64, bound: f64, slack: f64) {
        if observed > bound + slack {
            self.cumulative_violations.push(k);
        }
        self.slack_used = self.slack_used.max(slack);
        self.cumulative_bound.push(BoundPoint { k, observed, bound });
    }

    pub fn is_ok(&self) -> bool {
        self.violations.is_empty() && self.cumulative_violations.is_empty()
    }

    /// Passing bound checks, excluding those that only passed because of slack.
    pub fn tight_count(&self) -> usize {
        self.per_k_bound.iter().filter(|b| b.observed <= b.bound).count()
    }
}

/// When the run ended with `d = 0` exactly, `x^k` is constant from then on; returns the
/// last index whose value can be inferred this way.
fn fixed_point_horizon(trace: &RunTrace) -> Option<usize> {
    let last = trace.records.last()?;
    (trace.termination == Termination::StationaryTolReached && last.norm_d == 0.0 && last.k < trace.config.max_iters)
        .then_some(trace.config.max_iters)
}

fn require_fixed(trace: &RunTrace, p: &ProblemSpec) -> Result<f64> {
    if trace.config.ell_policy != EllPolicy::Fixed {
        return Err(contract("this bound needs a fixed-l run"));
    }
    let ell = trace.config.ell0;
    if !(ell > p.lipschitz()) {
        return Err(contract(format!("l = {ell} must exceed L = {}", p.lipschitz())));
    }
    Ok(ell)
}

fn require_records(trace: &RunTrace) -> Result<&[IterateRecord]> {
    if trace.records.is_empty() {
        Err(contract("trace has no iterates"))
    } else {
        Ok(&trace.records)
    }
}

fn u0_of(r: &IterateRecord) -> Result<(f64, f64)> {
    match r.u0 {
        Some(v) => Ok((v, r.u0_gap.unwrap_or(0.0))),
        None => Err(contract(format!("u0 was not recorded at k = {}", r.k))),
    }
}

/// `min_{0 <= j <= k-1} w_1(x^j) <= (F_0^max - F^min) max(1, l) / k`, with `l` the largest
/// value used by the run.
pub fn check_nonconvex(trace: &RunTrace, entry: &BenchmarkEntry) -> Result<RateReport> {
    let recs = require_records(trace)?;
    let f_min = entry
        .ground_truth()
        .f_min
        .ok_or_else(|| contract(format!("{} has no known lower bound F^min", entry.id)))?;
    let ell = trace.max_ell();
    let f0_max = recs[0].f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (f0_max - f_min) * ell.max(1.0);
    let mut report = RateReport::new(Theorem::NonconvexW1, trace, ell);
    let mut running = f64::INFINITY;
    let mut series = Vec::new();
    for (j, r) in recs.iter().enumerate() {
        let w1 = r
            .w1
            .ok_or_else(|| contract(format!("w1 was not recorded at k = {}", r.k)))?;
        running = running.min(w1);
        let k = j + 1;
        let bound = scale / k as f64;
        report.push(k, running, bound, REL_SLACK * (1.0 + bound));
        series.push((k, running));
    }
    if let Some(h) = fixed_point_horizon(trace) {
        for k in recs.len() + 1..=h {
            let bound = scale / k as f64;
            report.push(k, running, bound, REL_SLACK * (1.0 + bound));
        }
        report.extended_to = Some(h);
    }
    report.empirical_rate = fit_rate(&series, RateModel::PowerLaw).ok();
    Ok(report)
}

/// `u_0(x^k) <= l R / (2k)` for `k >= 1`.
pub fn check_convex(trace: &RunTrace, entry: &BenchmarkEntry) -> Result<RateReport> {
    if !matches!(entry.regime, Regime::Convex | Regime::StronglyConvex) {
        return Err(contract(format!("{} is not convex", entry.id)));
    }
    let recs = require_records(trace)?;
    let ell = require_fixed(trace, &entry.spec)?;
    let r_fn = entry
        .ground_truth()
        .r_constant
        .clone()
        .ok_or_else(|| contract(format!("{} has no R constant", entry.id)))?;
    let r = r_fn(&recs[0].x).ok_or_else(|| contract("R is undefined for this x0"))?;
    let mut report = RateReport::new(Theorem::ConvexU0, trace, ell);
    let mut series = Vec::new();
    let mut last = (f64::NAN, 0.0);
    for rec in recs {
        last = u0_of(rec)?;
        if rec.k == 0 {
            continue;
        }
        let bound = ell * r / (2.0 * rec.k as f64);
        report.push(rec.k, last.0, bound, last.1 + REL_SLACK * (1.0 + bound));
        series.push((rec.k, last.0));
    }
    if let Some(h) = fixed_point_horizon(trace) {
        for k in recs.len()..=h {
            let bound = ell * r / (2.0 * k as f64);
            report.push(k, last.0, bound, last.1 + REL_SLACK * (1.0 + bound));
        }
        report.extended_to = Some(h);
    }
    report.empirical_rate = fit_rate(&series, RateModel::PowerLaw).ok();
    Ok(report)
}

/// `sqrt((l - mu)/(l + nu))`.
pub fn strong_factor(ell: f64, mu: f64, nu: f64) -> f64 {
    ((ell - mu) / (ell + nu)).max(0.0).sqrt()
}

/// Limit of the sequence started at the trace's `x^0`, computed by a long run with the
/// same configuration.
pub fn reference_limit(p: &ProblemSpec, trace: &RunTrace) -> Result<(Vec<f64>, f64)> {
    let x0 = &require_records(trace)?[0].x;
    let cfg = RunConfig {
        max_iters: REFERENCE_ITERS,
        stop_tol: 0.0,
        record_u0: false,
        record_w1: false,
        ..trace.config.clone()
    };
    let reference = run(p, x0, &cfg)?;
    let last = reference
        .records
        .last()
        .ok_or_else(|| contract("reference run produced no iterates"))?;
    if reference.termination == Termination::SolverFailure || !(last.norm_d <= REFERENCE_TOL) {
        return Err(Error::Convergence {
            iterations: last.k,
            residual: last.norm_d,
            best: last.x.clone(),
        });
    }
    let xstar: Vec<f64> = last.x.iter().zip(&last.d).map(|(a, b)| a + b).collect();
    Ok((xstar, last.norm_d))
}

/// `|x^{k+1} - x*| <= sqrt((l - mu)/(l + nu)) |x^k - x*|` and its `k`-th power from `x^0`.
pub fn check_strongly_convex(trace: &RunTrace, entry: &BenchmarkEntry) -> Result<RateReport> {
    if entry.regime != Regime::StronglyConvex {
        return Err(contract(format!("{} is not strongly convex", entry.id)));
    }
    let p = &entry.spec;
    let recs = require_records(trace)?;
    let ell = require_fixed(trace, p)?;
    let q = strong_factor(ell, p.mu(), p.nu());
    let (xstar, tail) = reference_limit(p, trace)?;
    // The reference limit is known to within the geometric tail of its last step.
    let ref_err = if q < 1.0 { tail * q / (1.0 - q) } else { tail };
    let round = |x: &[f64]| 4.0 * f64::EPSILON * (norm(x) + norm(&xstar)) + ref_err;
    let dists: Vec<f64> = recs.iter().map(|r| dist(&r.x, &xstar)).collect();
    let mut report = RateReport::new(Theorem::StronglyConvexLinear, trace, ell);
    report.factor = Some(q);
    for k in 0..recs.len().saturating_sub(1) {
        if dists[k] < DIST_FLOOR {
            break;
        }
        let slack = REL_SLACK * dists[k] + round(&recs[k + 1].x);
        report.push(k + 1, dists[k + 1], q * dists[k], slack);
    }
    for (k, d) in dists.iter().enumerate() {
        let bound = q.powi(k as i32) * dists[0];
        let slack = REL_SLACK * dists[0] * (1.0 + k as f64) + round(&recs[k].x);
        report.push_cumulative(k, *d, bound, slack);
        if *d < DIST_FLOOR {
            break;
        }
    }
    let series: Vec<(usize, f64)> = dists
        .iter()
        .enumerate()
        .take_while(|(_, d)| **d >= DIST_FLOOR)
        .map(|(k, d)| (k, *d))
        .collect();
    report.empirical_rate = fit_rate(&series, RateModel::Geometric).ok();
    Ok(report)
}

/// `u_0(x^{k+1}) <= (1 - tau/l) u_0(x^k)`.
pub fn check_pl(trace: &RunTrace, entry: &BenchmarkEntry, tau: f64) -> Result<RateReport> {
    if !matches!(entry.regime, Regime::StronglyConvex | Regime::ProximalPL) {
        return Err(contract(format!("{} has no PL guarantee", entry.id)));
    }
    let recs = require_records(trace)?;
    let ell = require_fixed(trace, &entry.spec)?;
    if !(tau > 0.0) {
        return Err(contract(format!("tau must be positive, got {tau}")));
    }
    if tau >= ell {
        return Err(contract(format!("tau = {tau} >= l = {ell} gives a nonpositive factor")));
    }
    let q = 1.0 - tau / ell;
    let mut report = RateReport::new(Theorem::PlLinear, trace, ell);
    report.factor = Some(q);
    report.tau = Some(tau);
    let mut series = Vec::new();
    for pair in recs.windows(2) {
        let (a, ga) = u0_of(&pair[0])?;
        let (b, gb) = u0_of(&pair[1])?;
        let bound = q * a;
        report.push(pair[1].k, b, bound, gb + q * ga + REL_SLACK * bound);
        if a > 10.0 * ga {
            series.push((pair[0].k, a));
        }
    }
    if let Some(last) = recs.last() {
        let (v, g) = u0_of(last)?;
        if v > 10.0 * g {
            series.push((last.k, v));
        }
    }
    report.empirical_rate = fit_rate(&series, RateModel::Geometric).ok();
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate {
    pub tau_hat: f64,
    pub samples: usize,
    pub excluded: usize,
    pub argmin: Vec<f64>,
}

/// `tau_hat = min L w_L(x) / u_0(x)` over uniform samples of the test box (clipped to the
/// domain) and any extra points, skipping points with `u_0 < 1e-10`.
pub fn estimate_tau(p: &ProblemSpec, extra: &[Vec<f64>], samples: usize, seed: u64) -> Result<TauEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tb = p.test_box();
    let (lo, hi) = match p.domain_box() {
        Some((dl, dh)) => (
            tb.lower.iter().zip(&dl).map(|(a, b)| a.max(*b)).collect::<Vec<_>>(),
            tb.upper.iter().zip(&dh).map(|(a, b)| a.min(*b)).collect::<Vec<_>>(),
        ),
        None => (tb.lower.clone(), tb.upper.clone()),
    };
    let mut points: Vec<Vec<f64>> = (0..samples)
        .map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..=*b)).collect())
        .collect();
    points.extend(extra.iter().cloned());
    let l = p.lipschitz();
    let method = merit::default_u0_method(p);
    if method == U0Method::Unavailable {
        return Err(contract(format!("{} has no u0 oracle", p.id())));
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut excluded = 0;
    for x in &points {
        let ev = merit::u0(p, x, Some(method), 0)?;
        let u = ev.u0.unwrap_or(0.0);
        if u < TAU_U0_FLOOR {
            excluded += 1;
            continue;
        }
        let ratio = l * merit::w(p, x, l)? / u;
        if ratio < best.0 {
            best = (ratio, x.clone());
        }
    }
    if !best.0.is_finite() {
        return Err(contract("every sample was near-stationary"));
    }
    Ok(TauEstimate {
        tau_hat: best.0,
        samples: points.len(),
        excluded,
        argmin: best.1,
    })
}

/// A bound check selectable by theorem.
pub trait RateCheck: Send + Sync {
    fn theorem(&self) -> Theorem;
    fn check(&self, trace: &RunTrace, entry: &BenchmarkEntry) -> Result<RateReport>;
}

struct Nonconvex;
struct Convex;
struct Strong;

/// Uses the entry's known `tau`, else an estimate over samples and the trace's iterates.
pub struct Pl {
    pub tau: Option<f64>,
    pub seed: u64,
}

impl RateCheck for Nonconvex {
    fn theorem(&self) -> Theorem {
        Theorem::NonconvexW1
    }
    fn check(&self, t: &RunTrace, e: &BenchmarkEntry) -> Result<RateReport> {
        check_nonconvex(t, e)
    }
}

impl RateCheck for Convex {
    fn theorem(&self) -> Theorem {
        Theorem::ConvexU0
    }
    fn check(&self, t: &RunTrace, e: &BenchmarkEntry) -> Result<RateReport> {
        check_convex(t, e)
    }
}

impl RateCheck for Strong {
    fn theorem(&self) -> Theorem {
        Theorem::StronglyConvexLinear
    }
    fn check(&self, t: &RunTrace, e: &BenchmarkEntry) -> Result<RateReport> {
        check_strongly_convex(t, e)
    }
}

impl RateCheck for Pl {
    fn theorem(&self) -> Theorem {
        Theorem::PlLinear
    }
    fn check(&self, t: &RunTrace, e: &BenchmarkEntry) -> Result<RateReport> {
        let tau = match self.tau.or(e.ground_truth().tau) {
            Some(tau) => tau,
            None => {
                let xs: Vec<Vec<f64>> = t.records.iter().map(|r| r.x.clone()).collect();
                estimate_tau(&e.spec, &xs, TAU_SAMPLES, self.seed)?.tau_hat
            }
        };
        check_pl(t, e, tau)
    }
}

#[derive(Clone)]
pub struct RateRegistry {
    checks: BTreeMap<Theorem, Arc<dyn RateCheck>>,
}

impl RateRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self {
            checks: BTreeMap::new(),
        };
        reg.register(Arc::new(Nonconvex));
        reg.register(Arc::new(Convex));
        reg.register(Arc::new(Strong));
        reg.register(Arc::new(Pl { tau: None, seed: 0 }));
        reg
    }

    pub fn register(&mut self, check: Arc<dyn RateCheck>) {
        self.checks.insert(check.theorem(), check);
    }

    pub fn get(&self, t: Theorem) -> Option<&Arc<dyn RateCheck>> {
        self.checks.get(&t)
    }

    pub fn check(&self, t: Theorem, trace: &RunTrace, entry: &BenchmarkEntry) -> Result<RateReport> {
        self.get(t)
            .ok_or_else(|| contract(format!("no check registered for {t:?}")))?
            .check(trace, entry)
    }

    /// Every theorem the entry supports, in a fixed order.
    pub fn check_all(&self, trace: &RunTrace, entry: &BenchmarkEntry) -> Result<Vec<RateReport>> {
        entry.theorems.iter().map(|t| self.check(*t, trace, entry)).collect()
    }
}
