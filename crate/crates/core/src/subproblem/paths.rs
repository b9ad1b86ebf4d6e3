//! Closed-form and dual solver paths.

use super::simplex::{DualProblem, InnerMap};
use super::{step_to, DirectionContext, DirectionSolver, RawDirection, SolverConfig, SolverPath};
use crate::error::Result;
use crate::linalg::{dot, norm_sq, sub};
use crate::problem::{Jacobian, NonsmoothPart, ProblemSpec};

fn zeros(m: usize, n: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; n]; m]
}

/// One smooth objective: `d = -grad f(x) / l`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Analytic1D;

impl DirectionSolver for Analytic1D {
    fn path(&self) -> SolverPath {
        SolverPath::Analytic1D
    }

    fn applicable(&self, p: &ProblemSpec) -> bool {
        p.m() == 1 && p.nonsmooth(0).is_zero()
    }

    fn solve(&self, ctx: &DirectionContext<'_>, _cfg: &SolverConfig) -> Result<RawDirection> {
        let d = ctx.grads[0].iter().map(|g| -g / ctx.ell).collect();
        Ok(RawDirection {
            d,
            lambda: vec![1.0],
            eta: Some(zeros(1, ctx.x.len())),
        })
    }
}

/// One objective with a prox: `d = prox_{g/l}(x - grad f(x)/l) - x`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProxM1;

impl DirectionSolver for ProxM1 {
    fn path(&self) -> SolverPath {
        SolverPath::ProxM1
    }

    fn applicable(&self, p: &ProblemSpec) -> bool {
        p.m() == 1 && p.nonsmooth(0).has_prox()
    }

    fn solve(&self, ctx: &DirectionContext<'_>, _cfg: &SolverConfig) -> Result<RawDirection> {
        let ell = ctx.ell;
        let z: Vec<f64> = ctx.x.iter().zip(&ctx.grads[0]).map(|(x, g)| x - g / ell).collect();
        let g = ctx.p.nonsmooth(0);
        let prox = g.prox(&z, 1.0 / ell).expect("applicable() checked prox availability");
        let eta: Vec<f64> = z.iter().zip(&prox).map(|(a, b)| ell * (a - b)).collect();
        Ok(RawDirection {
            d: step_to(ctx.x, &prox),
            lambda: vec![1.0],
            eta: Some(vec![eta]),
        })
    }
}

/// Two smooth objectives: the minimal-norm point of the segment between the gradients.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dual2D;

impl DirectionSolver for Dual2D {
    fn path(&self) -> SolverPath {
        SolverPath::Dual2D
    }

    fn applicable(&self, p: &ProblemSpec) -> bool {
        p.m() == 2 && p.all_nonsmooth_zero()
    }

    fn solve(&self, ctx: &DirectionContext<'_>, _cfg: &SolverConfig) -> Result<RawDirection> {
        let (g1, g2) = (&ctx.grads[0], &ctx.grads[1]);
        let diff = sub(g2, g1);
        let denom = norm_sq(&diff);
        // t is the weight on grad f_1.
        let t = if denom > 0.0 {
            (dot(&diff, g2) / denom).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let d = g1
            .iter()
            .zip(g2)
            .map(|(a, b)| -(t * a + (1.0 - t) * b) / ctx.ell)
            .collect();
        Ok(RawDirection {
            d,
            lambda: vec![t, 1.0 - t],
            eta: Some(zeros(2, ctx.x.len())),
        })
    }
}

/// `d(v) = prox_{g/l}(x - v/l) - x` for the common nonsmooth part `g`.
pub(crate) struct SharedInner<'a> {
    pub x: &'a [f64],
    pub ell: f64,
    pub g: &'a NonsmoothPart,
    pub g_at_x: f64,
}

impl SharedInner<'_> {
    fn z(&self, v: &[f64]) -> Vec<f64> {
        self.x.iter().zip(v).map(|(x, v)| x - v / self.ell).collect()
    }
}

impl InnerMap for SharedInner<'_> {
    fn eval(&self, v: &[f64]) -> (Vec<f64>, f64) {
        if self.g.is_zero() {
            return (v.iter().map(|v| -v / self.ell).collect(), 0.0);
        }
        let p = self.g.prox(&self.z(v), 1.0 / self.ell).expect("prox-capable part");
        let d = step_to(self.x, &p);
        let y: Vec<f64> = self.x.iter().zip(&d).map(|(a, b)| a + b).collect();
        (d, self.g.eval(&y) - self.g_at_x)
    }

    fn jacobian(&self, v: &[f64]) -> Option<Jacobian> {
        Some(self.g.prox_jacobian(&self.z(v), 1.0 / self.ell)?.scaled(-1.0 / self.ell))
    }
}

/// Dual ascent over the simplex when every `g_i` is zero or all share one prox.
#[derive(Clone, Copy, Debug, Default)]
pub struct DualSimplex;

impl DirectionSolver for DualSimplex {
    fn path(&self) -> SolverPath {
        SolverPath::DualSimplex
    }

    fn applicable(&self, p: &ProblemSpec) -> bool {
        p.all_nonsmooth_zero() || p.shared_nonsmooth().is_some()
    }

    fn solve(&self, ctx: &DirectionContext<'_>, cfg: &SolverConfig) -> Result<RawDirection> {
        let (m, n) = (ctx.p.m(), ctx.x.len());
        let g = ctx.p.nonsmooth(0);
        if g.is_zero() && ctx.grads.iter().flatten().all(|v| *v == 0.0) {
            return Ok(RawDirection {
                d: vec![0.0; n],
                lambda: vec![1.0 / m as f64; m],
                eta: Some(zeros(m, n)),
            });
        }
        let inner = SharedInner {
            x: ctx.x,
            ell: ctx.ell,
            g,
            g_at_x: ctx.g_at_x[0],
        };
        let offsets = vec![0.0; m];
        let prob = DualProblem {
            rows: &ctx.grads,
            offsets: &offsets,
            ell: ctx.ell,
            inner: &inner,
        };
        let scale = ctx.grads.iter().map(|a| norm_sq(a)).fold(0.0, f64::max) / ctx.ell;
        let accept = cfg.tolerance * scale.max(1.0);
        let sol = prob.solve(None, accept * 1e-4, accept, cfg.max_inner_iters)?;
        let v: Vec<f64> = (0..n)
            .map(|j| (0..m).map(|i| sol.lambda[i] * ctx.grads[i][j]).sum())
            .collect();
        let eta_shared: Vec<f64> = if g.is_zero() {
            vec![0.0; n]
        } else {
            // l (z - prox(z)) lies in the subdifferential of g at prox(z).
            let z = inner.z(&v);
            let p = g.prox(&z, 1.0 / ctx.ell).expect("prox-capable part");
            z.iter().zip(&p).map(|(a, b)| ctx.ell * (a - b)).collect()
        };
        Ok(RawDirection {
            d: sol.d,
            lambda: sol.lambda,
            eta: Some(vec![eta_shared; m]),
        })
    }
}
