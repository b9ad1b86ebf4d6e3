//! Merit functions: `w_l`, computed through the subproblem, and
//! `u_0(x) = sup_y min_i (F_i(x) - F_i(y))`, computed by one of several oracles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::linalg::{dist, norm, norm_sq};
use crate::problem::{evaluate_objectives, ProblemSpec};
use crate::subproblem::simplex::{BoxInner, DualProblem};
use crate::subproblem::{solve_direction, SolverConfig};

/// Objective values above this are treated as divergence to `+inf`.
pub const U0_CEILING: f64 = 1e12;
pub const DEFAULT_GRID_POINTS: usize = 1_000_000;
pub const DEFAULT_ASCENT_ITERS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum U0Method {
    ClosedForm,
    ConcaveAscent,
    GridBruteForce,
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeritEvaluation {
    /// `(l, w_l(x))` pairs in the order requested.
    pub w_at: Vec<(f64, f64)>,
    /// `None` when no oracle applies.
    #[serde(with = "crate::extreal::option")]
    pub u0: Option<f64>,
    pub u0_method: U0Method,
    pub u0_certified_gap: f64,
}

/// `w_l(x)` with the default solver configuration.
pub fn w(p: &ProblemSpec, x: &[f64], ell: f64) -> Result<f64> {
    Ok(solve_direction(p, x, ell, &SolverConfig::default())?.w_ell)
}

/// Picks the best oracle the problem supports.
pub fn default_u0_method(p: &ProblemSpec) -> U0Method {
    if p.ground_truth().and_then(|g| g.u0.as_ref()).is_some() {
        U0Method::ClosedForm
    } else if p.is_convex() {
        U0Method::ConcaveAscent
    } else if p.n() <= 2 {
        U0Method::GridBruteForce
    } else {
        U0Method::Unavailable
    }
}

/// `u_0(x)` by the requested oracle (`None` selects [`default_u0_method`]). `budget` is
/// the iteration count for ascent and the total point count for the grid; 0 means the
/// default.
pub fn u0(p: &ProblemSpec, x: &[f64], method: Option<U0Method>, budget: usize) -> Result<MeritEvaluation> {
    let fx = evaluate_objectives(p, x)?;
    if fx.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Domain("u0 needs x in dom F".into()));
    }
    let method = method.unwrap_or_else(|| default_u0_method(p));
    let (u0, gap) = match method {
        U0Method::ClosedForm => {
            let f = p
                .ground_truth()
                .and_then(|g| g.u0.as_ref())
                .ok_or_else(|| contract(format!("{} has no closed-form u0", p.id())))?;
            let v = f(x);
            (Some(v.value), v.gap)
        }
        U0Method::ConcaveAscent => {
            let budget = if budget == 0 { DEFAULT_ASCENT_ITERS } else { budget };
            let (v, g) = concave_ascent(p, x, &fx, budget)?;
            (Some(v), g)
        }
        U0Method::GridBruteForce => {
            let budget = if budget == 0 { DEFAULT_GRID_POINTS } else { budget };
            let (v, g) = grid_brute_force(p, &fx, budget)?;
            (Some(v), g)
        }
        U0Method::Unavailable => (None, f64::INFINITY),
    };
    Ok(MeritEvaluation {
        w_at: Vec::new(),
        u0,
        u0_method: method,
        u0_certified_gap: gap,
    })
}

/// `u_0` together with `w_l` for every `l` in `ells`.
pub fn evaluate(
    p: &ProblemSpec,
    x: &[f64],
    ells: &[f64],
    method: Option<U0Method>,
    budget: usize,
) -> Result<MeritEvaluation> {
    let mut ev = u0(p, x, method, budget)?;
    ev.w_at = ells
        .iter()
        .map(|&l| w(p, x, l).map(|v| (l, v)))
        .collect::<Result<_>>()?;
    Ok(ev)
}

/// `Psi(y) = max_i F_i(y) - F_i(x)`, so that `u_0(x) = -inf_y Psi(y)`.
fn psi_gap(p: &ProblemSpec, fx: &[f64], y: &[f64]) -> f64 {
    let fy = evaluate_objectives(p, y).expect("dimension checked");
    fy.iter().zip(fx).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
}

fn project(domain: &Option<(Vec<f64>, Vec<f64>)>, y: &mut [f64]) {
    if let Some((lo, hi)) = domain {
        for j in 0..y.len() {
            y[j] = y[j].clamp(lo[j], hi[j]);
        }
    }
}

/// Values `F_i(y) - F_i(x)` and subgradients of `F_i` at `y`.
fn linearization(p: &ProblemSpec, fx: &[f64], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let fy = evaluate_objectives(p, y).expect("dimension checked");
    let offsets = fy.iter().zip(fx).map(|(a, b)| a - b).collect();
    let rows = (0..p.m())
        .map(|i| {
            let mut s = p.smooth(i).grad(y);
            if let Some(sg) = p.nonsmooth(i).subgradient(y) {
                s.iter_mut().zip(sg).for_each(|(a, b)| *a += b);
            }
            s
        })
        .collect();
    (offsets, rows)
}

/// Lower bound on `inf Psi` from the minorants `Psi(y) + s_i^T (z - y) + (c/2)|z - y|^2`,
/// where `c` is the strong convexity modulus of every `F_i`. With `c = 0` the minorant is
/// minimized over `region`, which must contain a minimizer of `Psi`.
fn psi_lower_bound(p: &ProblemSpec, fx: &[f64], y: &[f64], modulus: f64, region: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (offsets, rows) = linearization(p, fx, y);
    let shift = |b: &[f64]| -> Vec<f64> { b.iter().zip(y).map(|(a, c)| a - c).collect() };
    let reach: f64 = region
        .0
        .iter()
        .zip(&region.1)
        .zip(y)
        .map(|((l, h), c)| (c - l).abs().max((h - c).abs()).powi(2))
        .sum();
    let (ell, slack) = if modulus > 0.0 {
        (modulus, 0.0)
    } else {
        let eps = 1e-9 / reach.max(1e-12);
        (eps, 0.5 * eps * reach)
    };
    let inner = BoxInner {
        x: vec![0.0; y.len()],
        ell,
        domain: Some((shift(&region.0), shift(&region.1))),
    };
    let prob = DualProblem {
        rows: &rows,
        offsets: &offsets,
        ell,
        inner: &inner,
    };
    match prob.solve(None, 0.0, f64::INFINITY, 2_000) {
        Ok(sol) => sol.dual - slack,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn concave_ascent(p: &ProblemSpec, x: &[f64], fx: &[f64], budget: usize) -> Result<(f64, f64)> {
    if !p.is_convex() {
        return Err(contract("concave ascent needs convex objectives"));
    }
    let domain = p.domain_box();
    let modulus = (0..p.m())
        .map(|i| p.smooth(i).convexity_modulus() + p.nonsmooth(i).convexity_modulus())
        .fold(f64::INFINITY, f64::min);
    let region = domain
        .clone()
        .unwrap_or_else(|| (p.test_box().lower.clone(), p.test_box().upper.clone()));
    let diameter = dist(&region.0, &region.1);

    let mut y = x.to_vec();
    let mut best_y = y.clone();
    let mut best = 0.0;
    let mut avg = y.clone();
    let mut weight_sum = 0.0;
    let mut g_max: f64 = 0.0;
    for k in 1..=budget {
        let (offsets, rows) = linearization(p, fx, &y);
        let val = offsets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if val < best {
            best = val;
            best_y = y.clone();
        }
        if -best > U0_CEILING {
            return Ok((f64::INFINITY, 0.0));
        }
        let i = offsets
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let s = &rows[i];
        let gn = norm(s);
        if gn == 0.0 {
            break;
        }
        g_max = g_max.max(gn);
        let step = if modulus > 0.0 {
            2.0 / (modulus * (k as f64 + 1.0))
        } else {
            diameter / (g_max * (k as f64).sqrt())
        };
        for j in 0..y.len() {
            y[j] -= step * s[j];
        }
        project(&domain, &mut y);
        // Weights proportional to k for the strongly convex rate, uniform otherwise.
        let wk = if modulus > 0.0 { k as f64 } else { 1.0 };
        weight_sum += wk;
        for j in 0..y.len() {
            avg[j] += wk / weight_sum * (y[j] - avg[j]);
        }
        if k % 64 == 0 || k == budget {
            let va = psi_gap(p, fx, &avg);
            if va < best {
                best = va;
                best_y = avg.clone();
            }
        }
    }
    let lower = psi_lower_bound(p, fx, &best_y, modulus, &region);
    let value = (-best).max(0.0);
    let gap = (best - lower).max(0.0);
    Ok((value, gap))
}

fn grid_brute_force(p: &ProblemSpec, fx: &[f64], budget: usize) -> Result<(f64, f64)> {
    let n = p.n();
    if n > 2 {
        return Err(contract("grid brute force supports n <= 2"));
    }
    let tb = p.test_box();
    let (lo, hi) = match p.domain_box() {
        Some((dl, dh)) => (
            tb.lower.iter().zip(&dl).map(|(a, b)| a.max(*b)).collect::<Vec<_>>(),
            tb.upper.iter().zip(&dh).map(|(a, b)| a.min(*b)).collect::<Vec<_>>(),
        ),
        None => (tb.lower.clone(), tb.upper.clone()),
    };
    let per_dim = ((budget as f64).powf(1.0 / n as f64).floor() as usize).max(2);
    let h: Vec<f64> = (0..n).map(|j| (hi[j] - lo[j]) / (per_dim - 1) as f64).collect();
    let delta = 0.5 * norm(&h);
    let coord = |j: usize, t: usize| -> f64 {
        if t + 1 == per_dim {
            hi[j]
        } else {
            lo[j] + t as f64 * h[j]
        }
    };
    let rows = if n == 1 { 1 } else { per_dim };
    let m = p.m();
    // Each row yields (best value, max gradient norm per objective); max is order-free.
    let (best, grad_max) = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut best = f64::NEG_INFINITY;
            let mut gmax = vec![0.0_f64; m];
            let mut y = vec![0.0; n];
            for t in 0..per_dim {
                y[0] = coord(0, t);
                if n == 2 {
                    y[1] = coord(1, r);
                }
                let fy = evaluate_objectives(p, &y).expect("dimension checked");
                let v = fx.iter().zip(&fy).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
                best = best.max(v);
                for (i, g) in gmax.iter_mut().enumerate() {
                    *g = g.max(norm_sq(&p.smooth(i).grad(&y)));
                }
            }
            (best, gmax)
        })
        .reduce(
            || (f64::NEG_INFINITY, vec![0.0; m]),
            |a, b| {
                (
                    a.0.max(b.0),
                    a.1.iter().zip(&b.1).map(|(x, y)| x.max(*y)).collect(),
                )
            },
        );
    let lip = (0..m)
        .map(|i| {
            let gl = p.nonsmooth(i).lipschitz_on(&lo, &hi).unwrap_or(f64::INFINITY);
            grad_max[i].sqrt() + p.smooth(i).lipschitz_bound() * delta + gl
        })
        .fold(0.0, f64::max);
    Ok((best.max(0.0), lip * delta))
}

/// `tau = L / max(L/mu, 1)` for strongly convex smooth parts.
pub fn tau_strongly_convex(p: &ProblemSpec) -> Result<f64> {
    let mu = p.mu();
    if !(mu > 0.0) {
        return Err(contract(format!("tau needs mu > 0, got {mu}")));
    }
    let l = p.lipschitz();
    Ok(l / (l / mu).max(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `u_0(x) >= w_L(x)`
    U0AboveWL,
    /// `w_r(x) <= w_l(x)` for `r >= l`
    WNonincreasing,
    /// `w_l(x) <= (r/l) w_r(x)` for `r >= l`
    WScaled,
    /// `u_0(x) <= w_mu(x)`
    U0BelowWMu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationViolation {
    pub relation: Relation,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub points: usize,
    pub comparisons: usize,
    pub violations: Vec<RelationViolation>,
}

impl RelationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const RELATION_SLACK: f64 = 1e-8;

/// Checks the merit inequalities at every point. The `u_0` relations need convex
/// objectives and are skipped otherwise.
pub fn check_merit_relations(
    p: &ProblemSpec,
    xs: &[Vec<f64>],
    ells: &[f64],
    method: Option<U0Method>,
    budget: usize,
) -> Result<RelationReport> {
    let mut report = RelationReport::default();
    for x in xs {
        report.points += 1;
        let mut push = |relation, lhs: f64, rhs: f64, detail: String| {
            report.violations.push(RelationViolation {
                relation,
                x: x.clone(),
                lhs,
                rhs,
                detail,
            })
        };
        let ws: Vec<(f64, f64)> = ells
            .iter()
            .map(|&l| w(p, x, l).map(|v| (l, v)))
            .collect::<Result<_>>()?;
        for &(l, wl) in &ws {
            for &(r, wr) in &ws {
                if r < l {
                    continue;
                }
                report.comparisons += 2;
                if wr > wl + RELATION_SLACK {
                    push(Relation::WNonincreasing, wr, wl, format!("w_{r} > w_{l}"));
                }
                if wl > r / l * wr + RELATION_SLACK {
                    push(Relation::WScaled, wl, r / l * wr, format!("w_{l} > ({r}/{l}) w_{r}"));
                }
            }
        }
        if p.is_convex() {
            let ev = u0(p, x, method, budget)?;
            if let Some(u) = ev.u0 {
                let gap = ev.u0_certified_gap;
                let wl = w(p, x, p.lipschitz())?;
                report.comparisons += 1;
                if u + gap + RELATION_SLACK < wl {
                    push(Relation::U0AboveWL, u + gap, wl, format!("u0 = {u:e} (gap {gap:e}) < w_L"));
                }
                if p.mu() > 0.0 {
                    let wm = w(p, x, p.mu())?;
                    report.comparisons += 1;
                    if u > wm + gap + RELATION_SLACK {
                        push(Relation::U0BelowWMu, u, wm + gap, format!("u0 = {u:e} > w_mu = {wm:e}"));
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{NonsmoothPart, Objective, Quadratic, SmoothPart, TestBox};
    use std::sync::Arc;

    fn quad(c: f64, curvature: f64) -> SmoothPart {
        SmoothPart::new(Arc::new(Quadratic::isotropic(curvature, vec![c]).unwrap()), curvature, curvature, false)
            .unwrap()
    }

    fn biquad() -> ProblemSpec {
        ProblemSpec::new(
            "bq",
            vec![Objective::smooth_only(quad(1.0, 1.0)), Objective::smooth_only(quad(-1.0, 1.0))],
            TestBox::cube(1, 3.0).unwrap(),
        )
        .unwrap()
    }

    fn single() -> ProblemSpec {
        ProblemSpec::new("s", vec![Objective::smooth_only(quad(0.0, 1.0))], TestBox::cube(1, 3.0).unwrap())
            .unwrap()
    }

    #[test]
    fn w_examples() {
        assert_eq!(w(&biquad(), &[0.0], 1.0).unwrap(), 0.0);
        assert_eq!(w(&biquad(), &[2.0], 1.0).unwrap(), 0.5);
        assert_eq!(w(&biquad(), &[2.0], 2.0).unwrap(), 0.25);
        assert_eq!(w(&single(), &[2.0], 2.0).unwrap(), 1.0);
    }

    #[test]
    fn u0_oracles_on_biquad() {
        let p = biquad();
        for method in [U0Method::ConcaveAscent, U0Method::GridBruteForce] {
            let at0 = u0(&p, &[0.0], Some(method), 0).unwrap();
            assert!(at0.u0.unwrap().abs() <= 1e-9 + at0.u0_certified_gap, "{method:?}");
            let at2 = u0(&p, &[2.0], Some(method), 0).unwrap();
            let v = at2.u0.unwrap();
            assert!(v <= 0.5 + 1e-12 && v + at2.u0_certified_gap >= 0.5 - 1e-12, "{method:?} {at2:?}");
            assert!((v - 0.5).abs() < 1e-4, "{method:?} {at2:?}");
        }
    }

    #[test]
    fn u0_single_objective_is_excess_value() {
        let ev = u0(&single(), &[2.0], Some(U0Method::ConcaveAscent), 0).unwrap();
        assert!((ev.u0.unwrap() - 2.0).abs() < 1e-6, "{ev:?}");
    }

    #[test]
    fn closed_form_needs_ground_truth() {
        assert!(u0(&biquad(), &[1.0], Some(U0Method::ClosedForm), 0).is_err());
        assert_eq!(default_u0_method(&biquad()), U0Method::ConcaveAscent);
    }

    #[test]
    fn boxed_nonstrongly_convex_ascent_certifies() {
        let f = SmoothPart::new(Arc::new(Quadratic::isotropic(0.0, vec![0.0]).unwrap()), 1.0, 0.0, false).unwrap();
        let lin = crate::problem::LinearComposite::new(vec![vec![1.0]], 1.0, vec![0.5]).unwrap();
        let g = SmoothPart::new(Arc::new(lin), 1.0, 0.0, false).unwrap();
        let bx = || NonsmoothPart::box_indicator(vec![-2.0], vec![2.0]).unwrap();
        let p = ProblemSpec::new(
            "b",
            vec![Objective::new(f, bx()), Objective::new(g, bx())],
            TestBox::cube(1, 2.0).unwrap(),
        )
        .unwrap();
        // F_1 is constant, so u_0 = 0 everywhere.
        let ev = u0(&p, &[1.5], Some(U0Method::ConcaveAscent), 2_000).unwrap();
        assert!(ev.u0.unwrap() <= ev.u0_certified_gap + 1e-12);
        assert!(ev.u0_certified_gap < 1e-4, "{ev:?}");
    }

    #[test]
    fn tau_examples() {
        let mk = |l: f64, mu: f64| {
            let s = SmoothPart::new(Arc::new(Quadratic::isotropic(mu, vec![0.0]).unwrap()), l, mu, false).unwrap();
            ProblemSpec::new("t", vec![Objective::smooth_only(s)], TestBox::cube(1, 1.0).unwrap()).unwrap()
        };
        assert_eq!(tau_strongly_convex(&mk(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(tau_strongly_convex(&mk(4.0, 2.0)).unwrap(), 2.0);
        assert_eq!(tau_strongly_convex(&mk(1.0, 5.0)).unwrap(), 1.0);
        assert!(tau_strongly_convex(&mk(1.0, 0.0)).is_err());
    }

    #[test]
    fn relations_hold_on_biquad() {
        let xs: Vec<Vec<f64>> = [-2.5, -1.0, 0.0, 0.4, 2.0].iter().map(|v| vec![*v]).collect();
        let r = check_merit_relations(&biquad(), &xs, &[0.5, 1.0, 2.0, 4.0], None, 0).unwrap();
        assert!(r.is_ok(), "{:?}", r.violations);
    }
}
