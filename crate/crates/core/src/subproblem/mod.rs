//! The direction subproblem `min_d psi_x(d) + (l/2)|d|^2` with
//! `psi_x(d) = max_i grad f_i(x)^T d + g_i(x + d) - g_i(x)`.
//!
//! Each solver path implements [`DirectionSolver`]; [`SolverRegistry`] picks the first
//! applicable one in registration order unless a path is forced through
//! [`SolverConfig::path_override`].

mod fallback;
mod paths;
pub(crate) mod simplex;

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

pub use fallback::PrimalFallback;
pub use paths::{Analytic1D, Dual2D, DualSimplex, ProxM1};
pub use simplex::project_simplex;

use crate::error::{check_dim, contract, Error, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::problem::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Analytic1D,
    ProxM1,
    Dual2D,
    DualSimplex,
    PrimalFallback,
}

impl SolverPath {
    pub const ALL: [SolverPath; 5] = [
        SolverPath::Analytic1D,
        SolverPath::ProxM1,
        SolverPath::Dual2D,
        SolverPath::DualSimplex,
        SolverPath::PrimalFallback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverPath::Analytic1D => "analytic_1d",
            SolverPath::ProxM1 => "prox_m1",
            SolverPath::Dual2D => "dual_2d",
            SolverPath::DualSimplex => "dual_simplex",
            SolverPath::PrimalFallback => "primal_fallback",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for SolverPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_inner_iters: usize,
    #[serde(default)]
    pub path_override: Option<SolverPath>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_inner_iters: 10_000,
            path_override: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(contract("solver tolerance must be positive"));
        }
        Ok(())
    }
}

/// The solution of the subproblem at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub d: Vec<f64>,
    pub w_ell: f64,
    pub lambda: Vec<f64>,
    /// `eta_i` in the subdifferential of `g_i` at `x + d`, when the path can extract it.
    pub eta: Option<Vec<Vec<f64>>>,
    pub active_set: Vec<usize>,
    pub ell_used: f64,
    pub solver_path: SolverPath,
    /// `|sum_i lambda_i (grad f_i + eta_i) + l d|`; `None` when `eta` is unavailable.
    pub kkt_residual: Option<f64>,
    /// `psi_x(d)`.
    pub psi: f64,
}

/// Everything a solver needs about the point `x`.
pub struct DirectionContext<'a> {
    pub p: &'a ProblemSpec,
    pub x: &'a [f64],
    pub ell: f64,
    pub grads: Vec<Vec<f64>>,
    /// `g_i(x)`, all finite.
    pub g_at_x: Vec<f64>,
}

impl<'a> DirectionContext<'a> {
    pub fn new(p: &'a ProblemSpec, x: &'a [f64], ell: f64) -> Result<Self> {
        check_dim(p.n(), x.len())?;
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(contract(format!("ell must be positive and finite, got {ell}")));
        }
        let g_at_x: Vec<f64> = (0..p.m()).map(|i| p.nonsmooth(i).eval(x)).collect();
        if let Some(i) = g_at_x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("x is outside dom g_{}", i + 1)));
        }
        let grads = p.gradients(x);
        if grads.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite gradient at x".into()));
        }
        Ok(Self {
            p,
            x,
            ell,
            grads,
            g_at_x,
        })
    }

    /// `grad f_i(x)^T d + g_i(x + d) - g_i(x)` for every `i`.
    pub fn pieces(&self, d: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = self.x.iter().zip(d).map(|(a, b)| a + b).collect();
        (0..self.p.m())
            .map(|i| {
                let gy = self.p.nonsmooth(i).eval(&y);
                if gy == f64::INFINITY {
                    f64::INFINITY
                } else {
                    dot(&self.grads[i], d) + gy - self.g_at_x[i]
                }
            })
            .collect()
    }

    pub fn psi(&self, d: &[f64]) -> f64 {
        self.pieces(d).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// What a path hands back before the common bookkeeping.
#[derive(Clone, Debug)]
pub struct RawDirection {
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: Option<Vec<Vec<f64>>>,
}

pub trait DirectionSolver: Send + Sync {
    fn path(&self) -> SolverPath;
    fn applicable(&self, p: &ProblemSpec) -> bool;
    fn solve(&self, ctx: &DirectionContext<'_>, cfg: &SolverConfig) -> Result<RawDirection>;
}

/// Ordered collection of solver paths.
#[derive(Clone)]
pub struct SolverRegistry {
    solvers: Vec<Arc<dyn DirectionSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        Self { solvers: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Analytic1D));
        reg.register(Arc::new(ProxM1));
        reg.register(Arc::new(Dual2D));
        reg.register(Arc::new(DualSimplex));
        reg.register(Arc::new(PrimalFallback));
        reg
    }

    /// Later registrations of the same path replace earlier ones in place.
    pub fn register(&mut self, solver: Arc<dyn DirectionSolver>) {
        match self.solvers.iter().position(|s| s.path() == solver.path()) {
            Some(i) => self.solvers[i] = solver,
            None => self.solvers.push(solver),
        }
    }

    pub fn paths(&self) -> Vec<SolverPath> {
        self.solvers.iter().map(|s| s.path()).collect()
    }

    pub fn select(&self, p: &ProblemSpec, cfg: &SolverConfig) -> Result<&dyn DirectionSolver> {
        match cfg.path_override {
            Some(path) => {
                let s = self
                    .solvers
                    .iter()
                    .find(|s| s.path() == path)
                    .ok_or_else(|| contract(format!("solver path {path} is not registered")))?;
                if !s.applicable(p) {
                    return Err(contract(format!("solver path {path} does not apply to {}", p.id())));
                }
                Ok(s.as_ref())
            }
            None => self
                .solvers
                .iter()
                .find(|s| s.applicable(p))
                .map(|s| s.as_ref())
                .ok_or_else(|| contract(format!("no solver path applies to {}", p.id()))),
        }
    }

    pub fn solve(&self, p: &ProblemSpec, x: &[f64], ell: f64, cfg: &SolverConfig) -> Result<Direction> {
        cfg.validate()?;
        let ctx = DirectionContext::new(p, x, ell)?;
        let solver = self.select(p, cfg)?;
        let raw = solver.solve(&ctx, cfg)?;
        Ok(finalize(&ctx, raw, solver.path()))
    }
}

fn builtin_registry() -> &'static SolverRegistry {
    static REG: OnceLock<SolverRegistry> = OnceLock::new();
    REG.get_or_init(SolverRegistry::builtin)
}

/// `psi_x(d)`; `+inf` when `x + d` leaves some `dom g_i`.
pub fn psi(p: &ProblemSpec, x: &[f64], d: &[f64]) -> Result<f64> {
    check_dim(p.n(), d.len())?;
    let ctx = DirectionContext::new(p, x, 1.0)?;
    Ok(ctx.psi(d))
}

/// Solves the subproblem at `x` with the builtin solver paths.
pub fn solve_direction(p: &ProblemSpec, x: &[f64], ell: f64, cfg: &SolverConfig) -> Result<Direction> {
    builtin_registry().solve(p, x, ell, cfg)
}

/// Recomputes `|sum_i lambda_i (grad f_i(x) + eta_i) + l d|` from scratch; `None` when the
/// direction carries no subgradients.
pub fn check_kkt(p: &ProblemSpec, x: &[f64], dir: &Direction) -> Option<f64> {
    let eta = dir.eta.as_ref()?;
    let grads = p.gradients(x);
    let mut r: Vec<f64> = dir.d.iter().map(|v| dir.ell_used * v).collect();
    for i in 0..p.m() {
        for j in 0..r.len() {
            r[j] += dir.lambda[i] * (grads[i][j] + eta[i][j]);
        }
    }
    Some(norm(&r))
}

/// A step `d` with `x + d` equal to `target`, or else lying between `x` and `target` in
/// every coordinate, so that box feasibility of both endpoints carries over.
pub fn step_to(x: &[f64], target: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(target)
        .map(|(&a, &b)| {
            let mut d = b - a;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for _ in 0..8 {
                let y = a + d;
                if y >= lo && y <= hi {
                    break;
                }
                d = if d > 0.0 { d.next_down() } else { d.next_up() };
            }
            d
        })
        .collect()
}

fn finalize(ctx: &DirectionContext<'_>, raw: RawDirection, path: SolverPath) -> Direction {
    let RawDirection {
        mut d,
        mut lambda,
        mut eta,
    } = raw;
    let ell = ctx.ell;
    let mut pieces = ctx.pieces(&d);
    let mut top = pieces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w = -(top + 0.5 * ell * norm_sq(&d));
    if !(w >= 0.0) {
        // d = 0 is feasible with value 0, so anything worse is numerical noise.
        d = vec![0.0; d.len()];
        pieces = vec![0.0; ctx.p.m()];
        top = 0.0;
        w = 0.0;
        if let Some(e) = eta.as_mut() {
            for (i, ei) in e.iter_mut().enumerate() {
                if let Some(s) = ctx.p.nonsmooth(i).subgradient(ctx.x) {
                    *ei = s;
                }
            }
        }
    }
    let tie = 1e-9 * top.abs().max(1.0);
    let active_set: Vec<usize> = (0..pieces.len()).filter(|&i| pieces[i] >= top - tie).collect();
    for (i, l) in lambda.iter_mut().enumerate() {
        if !active_set.contains(&i) || !(*l > 0.0) {
            *l = 0.0;
        }
    }
    let total: f64 = lambda.iter().sum();
    if total > 0.0 {
        lambda.iter_mut().for_each(|l| *l /= total);
    } else {
        let share = 1.0 / active_set.len() as f64;
        for &i in &active_set {
            lambda[i] = share;
        }
    }
    let mut dir = Direction {
        d,
        w_ell: w,
        lambda,
        eta,
        active_set,
        ell_used: ell,
        solver_path: path,
        kkt_residual: None,
        psi: top,
    };
    dir.kkt_residual = check_kkt(ctx.p, ctx.x, &dir);
    dir
}

#[cfg(test)]
mod tests;
