//! The composite problem model `F_i = f_i + g_i`.

mod nonsmooth;
mod smooth;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use nonsmooth::{
    soft_threshold, AbsValue, ElasticNet, EuclideanNorm, Jacobian, MaxAbs, NonsmoothBuilder, NonsmoothKind,
    NonsmoothPart, NonsmoothRegistry, ProxOperator, ScalarProx, SubgradientOracle,
};
pub use smooth::{
    ExpWell, LinearComposite, Quadratic, SmoothBuilder, SmoothFunction, SmoothKernelRegistry,
    SmoothPart,
};
pub use validate::{validate_problem, CheckKind, ValidationFailure, ValidationReport, DEFAULT_SAMPLES};

use crate::error::{check_dim, contract, Error, Result};

/// Per-coordinate sampling region `[lower_j, upper_j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TestBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(contract("test box bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(contract("test box needs finite bounds with lower < upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; n], vec![half_width; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// A uniform sample; `unit` holds one value in `[0, 1)` per coordinate.
    pub fn point_at(&self, unit: &[f64]) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(unit)
            .map(|((l, u), t)| l + (u - l) * t)
            .collect()
    }
}

/// `u_0(x)` with a certified bound on its own error.
pub type U0ClosedForm = Arc<dyn Fn(&[f64]) -> U0Value + Send + Sync>;
/// The constant `R` of the bounded-level-set assumption as a function of `x^0`; `None`
/// when the assumption is not verified for that start.
pub type RConstant = Arc<dyn Fn(&[f64]) -> Option<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct U0Value {
    pub value: f64,
    pub gap: f64,
}

/// Analytic facts about a problem that an oracle could not produce on its own.
#[derive(Clone, Default)]
pub struct GroundTruth {
    pub pareto_set: Option<String>,
    pub u0: Option<U0ClosedForm>,
    pub r_constant: Option<RConstant>,
    /// A common lower bound `F^min` on the objectives.
    pub f_min: Option<f64>,
    pub tau: Option<f64>,
}

impl fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroundTruth")
            .field("pareto_set", &self.pareto_set)
            .field("u0", &self.u0.as_ref().map(|_| "closed form"))
            .field("r_constant", &self.r_constant.as_ref().map(|_| "closed form"))
            .field("f_min", &self.f_min)
            .field("tau", &self.tau)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct Objective {
    pub smooth: SmoothPart,
    pub nonsmooth: NonsmoothPart,
}

impl Objective {
    pub fn new(smooth: SmoothPart, nonsmooth: NonsmoothPart) -> Self {
        Self { smooth, nonsmooth }
    }

    pub fn smooth_only(smooth: SmoothPart) -> Self {
        Self::new(smooth, NonsmoothPart::zero())
    }
}

/// An immutable multiobjective problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    id: String,
    n: usize,
    objectives: Vec<Objective>,
    lipschitz: f64,
    mu: f64,
    nu: f64,
    test_box: TestBox,
    ground_truth: Option<GroundTruth>,
}

impl ProblemSpec {
    pub fn new(id: impl Into<String>, objectives: Vec<Objective>, test_box: TestBox) -> Result<Self> {
        if objectives.is_empty() {
            return Err(contract("a problem needs at least one objective"));
        }
        let n = test_box.dim();
        for obj in &objectives {
            check_dim(n, obj.smooth.dim())?;
            if let Some(k) = obj.nonsmooth.fixed_dim() {
                check_dim(n, k)?;
            }
        }
        let lipschitz = objectives
            .iter()
            .map(|o| o.smooth.lipschitz_bound())
            .fold(f64::NEG_INFINITY, f64::max);
        let mu = objectives
            .iter()
            .map(|o| o.smooth.convexity_modulus())
            .fold(f64::INFINITY, f64::min);
        let nu = objectives
            .iter()
            .map(|o| o.nonsmooth.convexity_modulus())
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            id: id.into(),
            n,
            objectives,
            lipschitz,
            mu,
            nu,
            test_box,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// The subproblem made of the listed objectives, with no ground truth attached.
    pub fn objective_slice(&self, indices: &[usize], id: impl Into<String>) -> Result<Self> {
        let objectives = indices
            .iter()
            .map(|&i| {
                self.objectives
                    .get(i)
                    .cloned()
                    .ok_or_else(|| contract(format!("objective index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(id, objectives, self.test_box.clone())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn smooth(&self, i: usize) -> &SmoothPart {
        &self.objectives[i].smooth
    }

    pub fn nonsmooth(&self, i: usize) -> &NonsmoothPart {
        &self.objectives[i].nonsmooth
    }

    /// `L = max_i L_i`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `mu = min_i mu_i`.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `nu = min_i nu_i`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn test_box(&self) -> &TestBox {
        &self.test_box
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    /// No smooth part is flagged nonconvex.
    pub fn is_convex(&self) -> bool {
        self.objectives.iter().all(|o| !o.smooth.is_nonconvex())
    }

    pub fn all_nonsmooth_zero(&self) -> bool {
        self.objectives.iter().all(|o| o.nonsmooth.is_zero())
    }

    /// The common `g` when every objective carries the same prox-capable part.
    pub fn shared_nonsmooth(&self) -> Option<&NonsmoothPart> {
        let first = &self.objectives[0].nonsmooth;
        (first.has_prox() && self.objectives.iter().all(|o| o.nonsmooth.same_as(first)))
            .then_some(first)
    }

    /// Intersection of all box-indicator domains, if any objective has one.
    pub fn domain_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut out: Option<(Vec<f64>, Vec<f64>)> = None;
        for o in &self.objectives {
            if let NonsmoothKind::BoxIndicator { lower, upper } = o.nonsmooth.kind() {
                match &mut out {
                    None => out = Some((lower.clone(), upper.clone())),
                    Some((lo, hi)) => {
                        for j in 0..lo.len() {
                            lo[j] = lo[j].max(lower[j]);
                            hi[j] = hi[j].min(upper[j]);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn gradients(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.objectives.iter().map(|o| o.smooth.grad(x)).collect()
    }

    /// Whether every `F_i(x)` is finite.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        evaluate_objectives(self, x)
            .map(|f| f.iter().all(|v| v.is_finite()))
            .unwrap_or(false)
    }
}

/// `(F_1(x), ..., F_m(x))`, with `+inf` outside `dom g_i`.
pub fn evaluate_objectives(p: &ProblemSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(p.n, x.len())?;
    p.objectives
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let v = o.smooth.eval(x) + o.nonsmooth.eval(x);
            if v.is_nan() {
                Err(Error::NotANumber(format!("F_{} evaluated to NaN", i + 1)))
            } else {
                Ok(v)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn biquad_1d(g2: NonsmoothPart) -> ProblemSpec {
        let f1 = SmoothPart::new(Arc::new(Quadratic::isotropic(1.0, vec![1.0]).unwrap()), 1.0, 1.0, false)
            .unwrap();
        let f2 = SmoothPart::new(Arc::new(Quadratic::isotropic(1.0, vec![-1.0]).unwrap()), 1.0, 1.0, false)
            .unwrap();
        ProblemSpec::new(
            "t",
            vec![Objective::smooth_only(f1), Objective::new(f2, g2)],
            TestBox::cube(1, 3.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn evaluates_symmetric_quadratics() {
        let p = biquad_1d(NonsmoothPart::zero());
        assert_eq!(evaluate_objectives(&p, &[0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(evaluate_objectives(&p, &[2.0]).unwrap(), vec![0.5, 4.5]);
    }

    #[test]
    fn box_indicator_gives_infinite_objective() {
        let p = biquad_1d(NonsmoothPart::box_indicator(vec![-1.0], vec![1.0]).unwrap());
        let f = evaluate_objectives(&p, &[2.0]).unwrap();
        assert_eq!(f, vec![0.5, f64::INFINITY]);
        assert!(!p.in_domain(&[2.0]));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = biquad_1d(NonsmoothPart::zero());
        assert!(matches!(
            evaluate_objectives(&p, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn constants_are_extrema_of_declared_values() {
        let a = SmoothPart::new(Arc::new(Quadratic::isotropic(2.0, vec![0.0]).unwrap()), 4.0, 2.0, false)
            .unwrap();
        let b = SmoothPart::new(Arc::new(Quadratic::isotropic(1.0, vec![1.0]).unwrap()), 1.5, 1.0, false)
            .unwrap();
        let p = ProblemSpec::new(
            "c",
            vec![
                Objective::new(a, NonsmoothPart::elastic_net(0.0, 0.5).unwrap()),
                Objective::new(b, NonsmoothPart::elastic_net(0.0, 0.25).unwrap()),
            ],
            TestBox::cube(1, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!((p.lipschitz(), p.mu(), p.nu()), (4.0, 1.0, 0.25));
    }
}
