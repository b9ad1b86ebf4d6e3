//! Sampled checks of the smoothness and convexity assumptions on a problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NonsmoothKind, ProblemSpec};
use crate::linalg::{dist, dot, norm, norm_sq, sub};

pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    GradientConsistency,
    Lipschitz,
    StrongConvexity,
    NonsmoothConvexity,
    SubgradientInequality,
    ProxCharacterization,
    BoxIndicator,
    DeclaredConstants,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub check: CheckKind,
    /// Zero-based objective index, `None` for problem-level checks.
    pub objective: Option<usize>,
    pub detail: String,
    pub witnesses: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub seed: u64,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn has(&self, check: CheckKind) -> bool {
        self.failures.iter().any(|f| f.check == check)
    }
}

struct Checker<'a> {
    p: &'a ProblemSpec,
    rng: ChaCha8Rng,
    failures: Vec<ValidationFailure>,
}

impl Checker<'_> {
    fn point(&mut self) -> Vec<f64> {
        let unit: Vec<f64> = (0..self.p.n()).map(|_| self.rng.gen::<f64>()).collect();
        self.p.test_box().point_at(&unit)
    }

    /// Records at most one failure per (check, objective); the first witness is enough.
    fn fail(&mut self, check: CheckKind, objective: Option<usize>, detail: String, witnesses: Vec<Vec<f64>>) {
        if self
            .failures
            .iter()
            .any(|f| f.check == check && f.objective == objective)
        {
            return;
        }
        self.failures.push(ValidationFailure {
            check,
            objective,
            detail,
            witnesses,
        });
    }

    fn gradient(&mut self, i: usize, x: &[f64]) {
        let f = self.p.smooth(i);
        let g = f.grad(x);
        let fx = f.eval(x);
        let mut fd = vec![0.0; x.len()];
        let mut y = x.to_vec();
        for j in 0..x.len() {
            let h = 1e-5 * x[j].abs().max(1.0);
            y[j] = x[j] + h;
            let up = f.eval(&y);
            y[j] = x[j] - h;
            let down = f.eval(&y);
            y[j] = x[j];
            fd[j] = (up - down) / (2.0 * h);
        }
        let err = dist(&fd, &g);
        let tol = 1e-5 * norm(&g).max(norm(&fd)) + 1e-8 * (1.0 + fx.abs());
        if !(err <= tol) {
            self.fail(
                CheckKind::GradientConsistency,
                Some(i),
                format!("|fd - grad| = {err:e} exceeds {tol:e}"),
                vec![x.to_vec()],
            );
        }
    }

    fn lipschitz(&mut self, i: usize, x: &[f64], y: &[f64]) {
        let f = self.p.smooth(i);
        let lhs = dist(&f.grad(x), &f.grad(y));
        let rhs = f.lipschitz_bound() * dist(x, y);
        if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
            self.fail(
                CheckKind::Lipschitz,
                Some(i),
                format!("gradient difference {lhs:e} exceeds L_i |x - y| = {rhs:e}"),
                vec![x.to_vec(), y.to_vec()],
            );
        }
    }

    fn strong_convexity(&mut self, i: usize, x: &[f64], y: &[f64]) {
        let f = self.p.smooth(i);
        let mu = f.convexity_modulus();
        let fx = f.eval(x);
        let fy = f.eval(y);
        let r = sub(y, x);
        let lower = fx + dot(&f.grad(x), &r) + 0.5 * mu * norm_sq(&r);
        if fy < lower - 1e-10 * (1.0 + fx.abs() + fy.abs()) {
            self.fail(
                CheckKind::StrongConvexity,
                Some(i),
                format!("f(y) = {fy:e} below the quadratic minorant {lower:e}"),
                vec![x.to_vec(), y.to_vec()],
            );
        }
    }

    /// Convexity of `g_i` with its declared modulus along a sampled triple.
    fn nonsmooth_convexity(&mut self, i: usize, x: &[f64], y: &[f64], theta: f64) {
        let g = self.p.nonsmooth(i);
        let gx = g.eval(x);
        let gy = g.eval(y);
        if !(gx.is_finite() && gy.is_finite()) {
            return;
        }
        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
        let gz = g.eval(&z);
        let nu = g.convexity_modulus();
        let upper = theta * gx + (1.0 - theta) * gy - 0.5 * nu * theta * (1.0 - theta) * dist(x, y).powi(2);
        if !(gz <= upper + 1e-10 * (1.0 + gx.abs() + gy.abs())) {
            self.fail(
                CheckKind::NonsmoothConvexity,
                Some(i),
                format!("g at the convex combination is {gz:e}, above {upper:e}"),
                vec![x.to_vec(), y.to_vec(), z],
            );
        }
    }

    fn subgradient(&mut self, i: usize, x: &[f64], y: &[f64]) {
        let g = self.p.nonsmooth(i);
        let gx = g.eval(x);
        let gy = g.eval(y);
        if !(gx.is_finite() && gy.is_finite()) {
            return;
        }
        let Some(s) = g.subgradient(x) else {
            self.fail(
                CheckKind::SubgradientInequality,
                Some(i),
                "no subgradient at a point of the domain".into(),
                vec![x.to_vec()],
            );
            return;
        };
        let lower = gx + dot(&s, &sub(y, x));
        if gy < lower - 1e-10 * (1.0 + gx.abs() + gy.abs()) {
            self.fail(
                CheckKind::SubgradientInequality,
                Some(i),
                format!("g(y) = {gy:e} below the linear minorant {lower:e}"),
                vec![x.to_vec(), y.to_vec()],
            );
        }
    }

    fn prox(&mut self, i: usize, z: &[f64], alpha: f64, ys: &[Vec<f64>]) {
        let g = self.p.nonsmooth(i);
        let Some(p) = g.prox(z, alpha) else {
            return;
        };
        let at_p = alpha * g.eval(&p) + 0.5 * dist(&p, z).powi(2);
        if !at_p.is_finite() {
            self.fail(
                CheckKind::ProxCharacterization,
                Some(i),
                "prox returned a point outside dom g".into(),
                vec![z.to_vec(), p],
            );
            return;
        }
        for y in ys {
            let at_y = alpha * g.eval(y) + 0.5 * dist(y, z).powi(2);
            if at_y < at_p - 1e-10 * (1.0 + at_p.abs()) {
                self.fail(
                    CheckKind::ProxCharacterization,
                    Some(i),
                    format!("prox objective {at_p:e} beaten by {at_y:e} (alpha = {alpha})"),
                    vec![z.to_vec(), p.clone(), y.clone()],
                );
                return;
            }
        }
    }

    fn box_indicator(&mut self, i: usize, x: &[f64]) {
        let g = self.p.nonsmooth(i);
        let NonsmoothKind::BoxIndicator { lower, upper } = g.kind() else {
            return;
        };
        let inside: Vec<f64> = x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect();
        let mut outside = inside.clone();
        let j = self.rng.gen_range(0..x.len());
        outside[j] = if self.rng.gen::<bool>() {
            upper[j] + 1.0 + upper[j].abs() * 1e-3
        } else {
            lower[j] - 1.0 - lower[j].abs() * 1e-3
        };
        if g.eval(&inside) != 0.0 {
            self.fail(
                CheckKind::BoxIndicator,
                Some(i),
                "indicator is not 0 inside the box".into(),
                vec![inside.clone()],
            );
        }
        if g.eval(&outside) != f64::INFINITY {
            self.fail(
                CheckKind::BoxIndicator,
                Some(i),
                "indicator is not +inf outside the box".into(),
                vec![outside],
            );
        }
    }

    fn declared_constants(&mut self) {
        let objs = self.p.objectives();
        let l = objs.iter().map(|o| o.smooth.lipschitz_bound()).fold(f64::NEG_INFINITY, f64::max);
        let mu = objs.iter().map(|o| o.smooth.convexity_modulus()).fold(f64::INFINITY, f64::min);
        let nu = objs.iter().map(|o| o.nonsmooth.convexity_modulus()).fold(f64::INFINITY, f64::min);
        if l != self.p.lipschitz() || mu != self.p.mu() || nu != self.p.nu() {
            self.fail(
                CheckKind::DeclaredConstants,
                None,
                format!(
                    "declared (L, mu, nu) = ({}, {}, {}) differ from the per-objective extrema ({l}, {mu}, {nu})",
                    self.p.lipschitz(),
                    self.p.mu(),
                    self.p.nu()
                ),
                vec![],
            );
        }
    }
}

/// Runs every sampled invariant of the problem model on `samples` points drawn uniformly
/// from the test box with the given seed. Failures are collected, never raised.
pub fn validate_problem(p: &ProblemSpec, samples: usize, seed: u64) -> ValidationReport {
    let mut c = Checker {
        p,
        rng: ChaCha8Rng::seed_from_u64(seed),
        failures: Vec::new(),
    };
    c.declared_constants();
    for _ in 0..samples.max(1) {
        let x = c.point();
        let y = c.point();
        let theta: f64 = c.rng.gen();
        let alpha = 0.05 + 2.0 * c.rng.gen::<f64>();
        let near: Vec<f64> = {
            let scale = 1e-3 * c.p.test_box().diameter();
            (0..x.len()).map(|j| x[j] + scale * (c.rng.gen::<f64>() - 0.5)).collect()
        };
        for i in 0..p.m() {
            c.gradient(i, &x);
            c.lipschitz(i, &x, &y);
            c.lipschitz(i, &x, &near);
            if !p.smooth(i).is_nonconvex() {
                c.strong_convexity(i, &x, &y);
            }
            c.nonsmooth_convexity(i, &x, &y, theta);
            c.subgradient(i, &x, &y);
            if let Some(pz) = p.nonsmooth(i).prox(&x, alpha) {
                // Compare against random points and against small perturbations of the prox.
                let mut ys = vec![y.clone(), near.clone()];
                for _ in 0..3 {
                    let step = 1e-2 * c.p.test_box().diameter();
                    ys.push(pz.iter().map(|v| v + step * (c.rng.gen::<f64>() - 0.5)).collect());
                }
                c.prox(i, &x, alpha, &ys);
            }
            c.box_indicator(i, &x);
        }
    }
    ValidationReport {
        samples,
        seed,
        failures: c.failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Objective, Quadratic, SmoothFunction, SmoothPart, TestBox};
    use serde_json::Value;
    use std::sync::Arc;

    #[derive(Debug)]
    struct WrongGradient;

    impl SmoothFunction for WrongGradient {
        fn kernel(&self) -> &'static str {
            "wrong"
        }
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64]) -> f64 {
            0.5 * norm_sq(x)
        }
        fn grad(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|v| 2.0 * v).collect()
        }
        fn params(&self) -> Value {
            Value::Null
        }
    }

    fn single(f: Arc<dyn SmoothFunction>, l: f64, mu: f64) -> ProblemSpec {
        let s = SmoothPart::new(f, l, mu, false).unwrap();
        ProblemSpec::new("v", vec![Objective::smooth_only(s)], TestBox::cube(2, 3.0).unwrap()).unwrap()
    }

    #[test]
    fn valid_quadratic_passes() {
        let p = single(Arc::new(Quadratic::isotropic(1.0, vec![1.0, 0.0]).unwrap()), 1.0, 1.0);
        let r = validate_problem(&p, 100, 7);
        assert!(r.is_ok(), "{:?}", r.failures);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let p = single(Arc::new(WrongGradient), 2.0, 0.0);
        let r = validate_problem(&p, 100, 7);
        assert!(r.has(CheckKind::GradientConsistency));
    }

    #[test]
    fn understated_lipschitz_bound_is_reported() {
        let p = single(Arc::new(Quadratic::isotropic(3.0, vec![0.0, 0.0]).unwrap()), 1.0, 0.0);
        let r = validate_problem(&p, 100, 7);
        assert!(r.has(CheckKind::Lipschitz));
        assert!(!r.has(CheckKind::GradientConsistency));
    }

    #[test]
    fn overstated_modulus_is_reported() {
        let p = single(Arc::new(Quadratic::isotropic(1.0, vec![0.0, 0.0]).unwrap()), 1.0, 2.0);
        assert!(validate_problem(&p, 50, 1).has(CheckKind::StrongConvexity));
    }
}
