//! Dual ascent over the unit simplex for problems of the form
//!
//! `min_d max_i (a_i^T d + b_i) + h(d) + (l/2)|d|^2`,
//!
//! where `h` is convex and `d(v) = argmin_d v^T d + h(d) + (l/2)|d|^2` is cheap. The dual
//! function `theta(lambda) = min_d sum_i lambda_i (a_i^T d + b_i) + h(d) + (l/2)|d|^2` is
//! concave and smooth, with gradient `a_i^T d(A^T lambda) + b_i`.

use super::step_to;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, solve_dense};
use crate::problem::Jacobian;

/// The minimizer `d(v)` of the inner problem and the value `h(d(v))`.
pub(crate) trait InnerMap {
    fn eval(&self, v: &[f64]) -> (Vec<f64>, f64);

    /// Jacobian of `v -> d(v)` where it exists.
    fn jacobian(&self, _v: &[f64]) -> Option<Jacobian> {
        None
    }
}

/// `d(v) = clamp(x - v/l, domain) - x`.
pub(crate) struct BoxInner {
    pub x: Vec<f64>,
    pub ell: f64,
    pub domain: Option<(Vec<f64>, Vec<f64>)>,
}

impl BoxInner {
    fn target(&self, v: &[f64]) -> Vec<f64> {
        let z = self.x.iter().zip(v).map(|(x, v)| x - v / self.ell);
        match &self.domain {
            None => z.collect(),
            Some((lo, hi)) => z
                .zip(lo.iter().zip(hi))
                .map(|(z, (l, h))| z.clamp(*l, *h))
                .collect(),
        }
    }
}

impl InnerMap for BoxInner {
    fn eval(&self, v: &[f64]) -> (Vec<f64>, f64) {
        (step_to(&self.x, &self.target(v)), 0.0)
    }

    fn jacobian(&self, v: &[f64]) -> Option<Jacobian> {
        let free = |j: usize| match &self.domain {
            None => true,
            Some((lo, hi)) => {
                let z = self.x[j] - v[j] / self.ell;
                lo[j] < z && z < hi[j]
            }
        };
        Some(Jacobian::Diagonal(
            (0..v.len()).map(|j| if free(j) { -1.0 / self.ell } else { 0.0 }).collect(),
        ))
    }
}

pub(crate) struct DualProblem<'a> {
    pub rows: &'a [Vec<f64>],
    pub offsets: &'a [f64],
    pub ell: f64,
    pub inner: &'a dyn InnerMap,
}

#[derive(Clone, Debug)]
pub(crate) struct DualSolution {
    pub lambda: Vec<f64>,
    pub d: Vec<f64>,
    /// Primal objective at `d`.
    pub primal: f64,
    /// Dual value `theta(lambda)`, a lower bound on the optimum.
    pub dual: f64,
}

impl DualSolution {
    pub fn gap(&self) -> f64 {
        (self.primal - self.dual).max(0.0)
    }
}

struct Point {
    lambda: Vec<f64>,
    d: Vec<f64>,
    grad: Vec<f64>,
    theta: f64,
    primal: f64,
}

impl Point {
    fn gap(&self) -> f64 {
        (self.primal - self.theta).max(0.0)
    }
}

impl DualProblem<'_> {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn combine(&self, lambda: &[f64]) -> Vec<f64> {
        let n = self.rows[0].len();
        let mut v = vec![0.0; n];
        for (l, a) in lambda.iter().zip(self.rows) {
            if *l != 0.0 {
                for j in 0..n {
                    v[j] += l * a[j];
                }
            }
        }
        v
    }

    fn at(&self, lambda: Vec<f64>) -> Point {
        let v = self.combine(&lambda);
        let (d, h) = self.inner.eval(&v);
        let grad: Vec<f64> = self
            .rows
            .iter()
            .zip(self.offsets)
            .map(|(a, b)| dot(a, &d) + b)
            .collect();
        let reg = h + 0.5 * self.ell * norm_sq(&d);
        let theta = dot(&lambda, &grad) + reg;
        let primal = grad.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + reg;
        Point {
            lambda,
            d,
            grad,
            theta,
            primal,
        }
    }

    /// Local curvature scale used for the first step size.
    fn initial_step(&self) -> f64 {
        let sq: f64 = self.rows.iter().map(|a| norm_sq(a)).sum();
        if sq > 0.0 {
            self.ell / sq
        } else {
            1.0
        }
    }

    /// Maximizes the local quadratic model of `theta` at `base` over the simplex with a
    /// primal active-set method. The model is exact wherever `d(v)` stays affine.
    fn polish(&self, base: &Point) -> Option<Point> {
        let m = self.m();
        let v = self.combine(&base.lambda);
        let jac = self.inner.jacobian(&v)?.scaled(-1.0);
        // theta ~ e^T lambda - 0.5 lambda^T K lambda with K = A (-J) A^T, plus a tiny ridge
        // that makes the face systems nonsingular without moving d noticeably.
        let ja: Vec<Vec<f64>> = self.rows.iter().map(|r| jac.apply(r)).collect();
        let mut k = vec![vec![0.0; m]; m];
        for i in 0..m {
            for l in 0..=i {
                // Symmetrized, since a dense Jacobian carries rounding asymmetry.
                let val = 0.5 * (dot(&self.rows[i], &ja[l]) + dot(&self.rows[l], &ja[i]));
                k[i][l] = val;
                k[l][i] = val;
            }
        }
        let diag_max = (0..m).map(|i| k[i][i]).fold(0.0, f64::max);
        let ridge = 1e-14 * (1.0 + diag_max);
        for (i, row) in k.iter_mut().enumerate() {
            row[i] += ridge;
        }
        let e: Vec<f64> = (0..m)
            .map(|i| base.grad[i] + dot(&k[i], &base.lambda) - ridge * base.lambda[i])
            .collect();
        let mut lambda = base.lambda.clone();
        let mut free: Vec<bool> = lambda.iter().map(|&l| l > 0.0).collect();
        let tol = 1e-13 * (1.0 + diag_max + e.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
        for _ in 0..(4 * m + 20) {
            let idx: Vec<usize> = (0..m).filter(|&i| free[i]).collect();
            let q = idx.len();
            let mut a = vec![vec![0.0; q + 1]; q + 1];
            let mut rhs = vec![0.0; q + 1];
            for (r, &i) in idx.iter().enumerate() {
                for (c, &l) in idx.iter().enumerate() {
                    a[r][c] = k[i][l];
                }
                a[r][q] = 1.0;
                a[q][r] = 1.0;
                rhs[r] = e[i];
            }
            rhs[q] = 1.0;
            let sol = solve_dense(a, rhs, 1e-15)?;
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let blocked = idx.iter().enumerate().any(|(r, _)| sol[r] < 0.0);
            if blocked {
                // Move toward the face optimum until the first weight hits zero.
                let mut alpha = 1.0_f64;
                let mut hit = None;
                for (r, &i) in idx.iter().enumerate() {
                    if sol[r] < 0.0 {
                        let t = lambda[i] / (lambda[i] - sol[r]);
                        if t < alpha {
                            alpha = t;
                            hit = Some(i);
                        }
                    }
                }
                for (r, &i) in idx.iter().enumerate() {
                    lambda[i] += alpha * (sol[r] - lambda[i]);
                }
                if let Some(i) = hit {
                    lambda[i] = 0.0;
                    free[i] = false;
                }
                for i in 0..m {
                    if free[i] && lambda[i] <= 0.0 {
                        lambda[i] = 0.0;
                        free[i] = false;
                    }
                }
                continue;
            }
            for (r, &i) in idx.iter().enumerate() {
                lambda[i] = sol[r];
            }
            let mu = sol[q];
            // Reduced gradient of the minimization form: K lambda - e + mu >= 0 off the face.
            let mut worst = None;
            let mut worst_val = -tol;
            for i in 0..m {
                if !free[i] {
                    let r = dot(&k[i], &lambda) - e[i] + mu;
                    if r < worst_val {
                        worst_val = r;
                        worst = Some(i);
                    }
                }
            }
            match worst {
                Some(i) => free[i] = true,
                None => break,
            }
        }
        let total: f64 = lambda.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        lambda.iter_mut().for_each(|l| *l = l.max(0.0) / total);
        let cand = self.at(lambda);
        (cand.gap() < base.gap()).then_some(cand)
    }

    /// Projected gradient ascent with backtracking, interleaved with active-set polish.
    ///
    /// Stops once the duality gap is below `target`; `accept` is the looser gap that still
    /// counts as success when the iteration budget runs out.
    pub fn solve(
        &self,
        lambda0: Option<Vec<f64>>,
        target: f64,
        accept: f64,
        max_iters: usize,
    ) -> Result<DualSolution> {
        let m = self.m();
        let start = lambda0
            .filter(|l| l.len() == m)
            .map(|l| project_simplex(&l))
            .unwrap_or_else(|| vec![1.0 / m as f64; m]);
        let mut cur = self.at(start);
        let mut step = self.initial_step();
        let mut iterations = 0;
        let ascent_steps = 20;
        // Gaps below rounding of the objective are not resolvable.
        let target = target.max(8.0 * f64::EPSILON * (1.0 + cur.primal.abs()));
        let mut theta_before = f64::NEG_INFINITY;
        'outer: while cur.gap() > target && iterations < max_iters {
            // Re-linearize a few times; each pass is exact on the current affine piece.
            for _ in 0..4 {
                match self.polish(&cur) {
                    Some(p) => cur = p,
                    None => break,
                }
                if cur.gap() <= target {
                    break 'outer;
                }
            }
            let mut stalled = true;
            for _ in 0..ascent_steps {
                if cur.gap() <= target || iterations >= max_iters {
                    break;
                }
                iterations += 1;
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> = cur
                        .lambda
                        .iter()
                        .zip(&cur.grad)
                        .map(|(l, g)| l + step * g)
                        .collect();
                    let lambda = project_simplex(&trial);
                    let diff: Vec<f64> =
                        lambda.iter().zip(&cur.lambda).map(|(a, b)| a - b).collect();
                    let moved = norm_sq(&diff);
                    if moved == 0.0 {
                        break;
                    }
                    let cand = self.at(lambda);
                    let model = cur.theta + dot(&cur.grad, &diff) - moved / (2.0 * step);
                    if cand.theta >= model - 1e-15 * (1.0 + cur.theta.abs()) {
                        cur = cand;
                        accepted = true;
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
                stalled = false;
            }
            // Neither polish nor ascent moved the dual value since the last round.
            if cur.theta - theta_before <= 4.0 * f64::EPSILON * (1.0 + cur.theta.abs()) {
                stalled = true;
            }
            theta_before = cur.theta;
            if stalled {
                // No ascent possible at working precision.
                break;
            }
        }
        let sol = DualSolution {
            primal: cur.primal,
            dual: cur.theta,
            lambda: cur.lambda,
            d: cur.d,
        };
        if sol.gap() <= accept {
            Ok(sol)
        } else {
            Err(Error::Convergence {
                iterations,
                residual: sol.gap(),
                best: sol.d,
            })
        }
    }
}

/// Euclidean projection onto `{lambda >= 0, sum lambda = 1}`.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}
