//! The multiobjective proximal gradient iteration `x^{k+1} = x^k + d^k`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Error, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::merit::{self, U0Method};
use crate::problem::{evaluate_objectives, ProblemSpec};
use crate::subproblem::{solve_direction, Direction, SolverConfig, SolverPath};

/// Hard cap on doublings of `l` within a single iteration.
const MAX_DOUBLINGS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllPolicy {
    /// Constant `l`, which must exceed `L`.
    Fixed,
    /// Double `l` until the descent inequality holds; never decrease it.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub ell0: f64,
    pub ell_policy: EllPolicy,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub record_u0: bool,
    pub record_w1: bool,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub u0_method: Option<U0Method>,
    #[serde(default)]
    pub u0_budget: usize,
}

impl RunConfig {
    pub fn fixed(ell: f64, max_iters: usize) -> Self {
        Self {
            ell0: ell,
            ell_policy: EllPolicy::Fixed,
            max_iters,
            stop_tol: 1e-8,
            record_u0: false,
            record_w1: false,
            seed: 0,
            solver: SolverConfig::default(),
            u0_method: None,
            u0_budget: 0,
        }
    }

    pub fn adaptive(ell0: f64, max_iters: usize) -> Self {
        Self {
            ell_policy: EllPolicy::Adaptive,
            ..Self::fixed(ell0, max_iters)
        }
    }

    pub fn with_u0(mut self) -> Self {
        self.record_u0 = true;
        self
    }

    pub fn with_w1(mut self) -> Self {
        self.record_w1 = true;
        self
    }

    pub fn with_stop_tol(mut self, tol: f64) -> Self {
        self.stop_tol = tol;
        self
    }

    pub fn validate(&self, p: &ProblemSpec) -> Result<()> {
        if !(self.ell0 > 0.0 && self.ell0.is_finite()) {
            return Err(contract(format!("ell0 must be positive, got {}", self.ell0)));
        }
        if self.ell_policy == EllPolicy::Fixed && !(self.ell0 > p.lipschitz()) {
            return Err(contract(format!(
                "fixed ell = {} must exceed L = {}",
                self.ell0,
                p.lipschitz()
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(contract("stop_tol must be >= 0"));
        }
        self.solver.validate()
    }
}

/// One row of a run: the iterate `x^k` and the direction computed there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vec<f64>,
    #[serde(rename = "F")]
    pub f: Vec<f64>,
    pub d: Vec<f64>,
    pub norm_d: f64,
    pub w_ell: f64,
    pub ell_used: f64,
    pub lambda: Vec<f64>,
    pub solver_path: SolverPath,
    /// `psi_{x^k}(d^k)`.
    pub psi: f64,
    pub backtracks: usize,
    #[serde(default)]
    pub w1: Option<f64>,
    #[serde(default, with = "crate::extreal::option")]
    pub u0: Option<f64>,
    #[serde(default)]
    pub u0_gap: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StationaryTolReached,
    MaxIters,
    SolverFailure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub problem_id: String,
    pub config: RunConfig,
    pub records: Vec<IterateRecord>,
    pub termination: Termination,
    #[serde(default)]
    pub failure: Option<String>,
    /// Total doublings of `l` over the run.
    pub doublings: usize,
}

impl RunTrace {
    /// Largest `l` used anywhere in the run.
    pub fn max_ell(&self) -> f64 {
        self.records.iter().map(|r| r.ell_used).fold(self.config.ell0, f64::max)
    }

    /// Iterations actually taken, i.e. the index of the last iterate.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }
}

/// `F_i(x + d) - F_i(x) <= grad f_i(x)^T d + g_i(x + d) - g_i(x) + (l/2)|d|^2` for all `i`,
/// with additive slack `1e-12 (1 + |F_i(x)|)`.
pub fn check_descent(p: &ProblemSpec, x: &[f64], d: &[f64], ell: f64) -> Result<bool> {
    check_dim(p.n(), d.len())?;
    let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + b).collect();
    let fx = evaluate_objectives(p, x)?;
    let fy = evaluate_objectives(p, &y)?;
    if fx.iter().chain(&fy).any(|v| !v.is_finite()) {
        return Err(Error::Domain("descent check needs x and x + d in dom F".into()));
    }
    let half = 0.5 * ell * norm_sq(d);
    for i in 0..p.m() {
        // The g_i terms cancel on both sides; compare the smooth parts only.
        let fxi = p.smooth(i).eval(x);
        let lhs = p.smooth(i).eval(&y) - fxi;
        let rhs = dot(&p.smooth(i).grad(x), d) + half;
        if lhs > rhs + 1e-12 * (1.0 + fx[i].abs()) {
            return Ok(false);
        }
    }
    Ok(true)
}

fn direction_with_policy(
    p: &ProblemSpec,
    x: &[f64],
    ell: &mut f64,
    cfg: &RunConfig,
) -> Result<(Direction, usize)> {
    let mut backtracks = 0;
    loop {
        let dir = solve_direction(p, x, *ell, &cfg.solver)?;
        if cfg.ell_policy == EllPolicy::Fixed || check_descent(p, x, &dir.d, *ell)? {
            return Ok((dir, backtracks));
        }
        if backtracks >= MAX_DOUBLINGS {
            return Err(contract("descent inequality still fails after repeated doubling of ell"));
        }
        *ell *= 2.0;
        backtracks += 1;
    }
}

/// Runs the method from `x0`. A failing subproblem ends the run with
/// [`Termination::SolverFailure`] and the records gathered so far.
pub fn run(p: &ProblemSpec, x0: &[f64], cfg: &RunConfig) -> Result<RunTrace> {
    check_dim(p.n(), x0.len())?;
    cfg.validate(p)?;
    if !p.in_domain(x0) {
        return Err(contract("x0 must lie in dom F"));
    }
    let mut trace = RunTrace {
        problem_id: p.id().to_string(),
        config: cfg.clone(),
        records: Vec::new(),
        termination: Termination::MaxIters,
        failure: None,
        doublings: 0,
    };
    let mut x = x0.to_vec();
    let mut ell = cfg.ell0;
    for k in 0..=cfg.max_iters {
        let step = (|| -> Result<IterateRecord> {
            let f = evaluate_objectives(p, &x)?;
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("iterate {k} left dom F")));
            }
            let (dir, backtracks) = direction_with_policy(p, &x, &mut ell, cfg)?;
            let w1 = if cfg.record_w1 { Some(merit::w(p, &x, 1.0)?) } else { None };
            let (u0, u0_gap) = if cfg.record_u0 {
                let ev = merit::u0(p, &x, cfg.u0_method, cfg.u0_budget)?;
                (ev.u0, ev.u0.map(|_| ev.u0_certified_gap))
            } else {
                (None, None)
            };
            Ok(IterateRecord {
                k,
                x: x.clone(),
                f,
                norm_d: norm(&dir.d),
                d: dir.d,
                w_ell: dir.w_ell,
                ell_used: dir.ell_used,
                lambda: dir.lambda,
                solver_path: dir.solver_path,
                psi: dir.psi,
                backtracks,
                w1,
                u0,
                u0_gap,
            })
        })();
        let rec = match step {
            Ok(r) => r,
            Err(e) => {
                trace.termination = Termination::SolverFailure;
                trace.failure = Some(e.to_string());
                return Ok(trace);
            }
        };
        trace.doublings += rec.backtracks;
        let stop = rec.norm_d <= cfg.stop_tol;
        for (xj, dj) in x.iter_mut().zip(&rec.d) {
            *xj += dj;
        }
        trace.records.push(rec);
        if stop {
            trace.termination = Termination::StationaryTolReached;
            return Ok(trace);
        }
    }
    trace.termination = Termination::MaxIters;
    Ok(trace)
}
