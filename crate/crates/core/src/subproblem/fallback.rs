//! Cutting-plane solver for heterogeneous nonsmooth parts.
//!
//! Each piece `phi_i(d) = grad f_i(x)^T d + g_i(x + d) - g_i(x)` is replaced by the
//! maximum of its linearizations collected so far. The model
//! `max_cuts (c_j + s_j^T d) + (l/2)|d|^2` over the common box domain is solved exactly
//! enough by the simplex dual; its dual value bounds the true optimum from below, and the
//! true objective at the model minimizer bounds it from above.

use super::simplex::{BoxInner, DualProblem};
use super::{DirectionContext, DirectionSolver, RawDirection, SolverConfig, SolverPath};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::problem::ProblemSpec;

const MAX_CUTS: usize = 400;

struct Cut {
    objective: usize,
    slope: Vec<f64>,
    offset: f64,
}

/// Always applicable; handles any mix of nonsmooth kinds through subgradients.
#[derive(Clone, Copy, Debug, Default)]
pub struct PrimalFallback;

impl DirectionSolver for PrimalFallback {
    fn path(&self) -> SolverPath {
        SolverPath::PrimalFallback
    }

    fn applicable(&self, _p: &ProblemSpec) -> bool {
        true
    }

    fn solve(&self, ctx: &DirectionContext<'_>, cfg: &SolverConfig) -> Result<RawDirection> {
        let p = ctx.p;
        let (m, n) = (p.m(), ctx.x.len());
        let ell = ctx.ell;
        let domain = p.domain_box();
        if let Some((lo, hi)) = &domain {
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                return Err(Error::Domain("box domains have empty intersection".into()));
            }
        }
        let inner = BoxInner {
            x: ctx.x.to_vec(),
            ell,
            domain,
        };
        // Zero and box parts are linear on the domain, so their first cut is exact.
        let exact: Vec<bool> = (0..m)
            .map(|i| p.nonsmooth(i).is_zero() || p.nonsmooth(i).is_box())
            .collect();
        let y_at = |d: &[f64]| -> Vec<f64> { ctx.x.iter().zip(d).map(|(a, b)| a + b).collect() };
        let mut cuts: Vec<Cut> = Vec::new();
        let add_cut = |cuts: &mut Vec<Cut>, i: usize, d: &[f64], value: f64| {
            let y = y_at(d);
            let s = if exact[i] {
                vec![0.0; n]
            } else {
                p.nonsmooth(i).subgradient(&y).unwrap_or_else(|| vec![0.0; n])
            };
            let slope: Vec<f64> = ctx.grads[i].iter().zip(&s).map(|(a, b)| a + b).collect();
            let offset = value - dot(&slope, d);
            cuts.push(Cut {
                objective: i,
                slope,
                offset,
            });
        };
        let zero = vec![0.0; n];
        for i in 0..m {
            add_cut(&mut cuts, i, &zero, 0.0);
        }

        let scale = ctx.grads.iter().map(|a| norm_sq(a)).fold(0.0, f64::max) / ell;
        let accept = cfg.tolerance * scale.max(1.0);
        let target = accept * 1e-4;
        let mut best_d = zero.clone();
        let mut upper = 0.0;
        let mut lower = f64::NEG_INFINITY;
        let mut lambda_cuts: Option<Vec<f64>> = None;
        let mut best_lambda = vec![0.0; m];
        let mut iterations = 0;
        let inner_budget = cfg.max_inner_iters.max(100);
        while iterations < cfg.max_inner_iters {
            iterations += 1;
            let rows: Vec<Vec<f64>> = cuts.iter().map(|c| c.slope.clone()).collect();
            let offsets: Vec<f64> = cuts.iter().map(|c| c.offset).collect();
            let model = DualProblem {
                rows: &rows,
                offsets: &offsets,
                ell,
                inner: &inner,
            };
            let sol = match model.solve(lambda_cuts.clone(), target * 1e-2, f64::INFINITY, inner_budget) {
                Ok(s) => s,
                Err(e) => return Err(e),
            };
            lower = lower.max(sol.dual);
            let pieces = ctx.pieces(&sol.d);
            let value = pieces.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                + 0.5 * ell * norm_sq(&sol.d);
            let mut agg = vec![0.0; m];
            for (c, l) in cuts.iter().zip(&sol.lambda) {
                agg[c.objective] += l;
            }
            if value < upper || iterations == 1 && value <= upper {
                upper = value;
                best_d = sol.d.clone();
                best_lambda = agg;
            }
            if upper - lower <= target {
                break;
            }
            let mut grew = false;
            for i in 0..m {
                if !exact[i] && pieces[i].is_finite() {
                    add_cut(&mut cuts, i, &sol.d, pieces[i]);
                    grew = true;
                }
            }
            let mut lam = sol.lambda;
            if !grew {
                break;
            }
            if cuts.len() > MAX_CUTS {
                // Keep the initial cuts, the active ones and the most recent ones.
                let keep_recent = cuts.len() - MAX_CUTS / 4;
                let mut kept = Vec::new();
                let mut kept_lam = Vec::new();
                for (j, c) in cuts.into_iter().enumerate() {
                    let l = lam.get(j).copied().unwrap_or(0.0);
                    if j < m || l > 0.0 || j >= keep_recent {
                        kept.push(c);
                        kept_lam.push(l);
                    }
                }
                cuts = kept;
                lam = kept_lam;
            }
            lam.resize(cuts.len(), 0.0);
            lambda_cuts = Some(lam);
        }
        let gap = (upper - lower).max(0.0);
        if gap > accept {
            return Err(Error::Convergence {
                iterations,
                residual: gap,
                best: best_d,
            });
        }
        Ok(RawDirection {
            d: best_d,
            lambda: best_lambda,
            eta: None,
        })
    }
}
