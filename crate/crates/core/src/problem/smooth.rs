//! Smooth parts `f_i` and the named kernels they are built from.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{contract, Result};
use crate::linalg::{dot, mat_t_vec, mat_vec, norm_sq, sub};

/// A continuously differentiable function on `R^n`.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    /// Registry name of the kernel.
    fn kernel(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Parameters that rebuild this function through [`SmoothKernelRegistry::build`].
    fn params(&self) -> Value;
}

/// `f_i` together with its declared constants.
#[derive(Clone, Debug)]
pub struct SmoothPart {
    function: Arc<dyn SmoothFunction>,
    lipschitz_bound: f64,
    convexity_modulus: f64,
    nonconvex: bool,
}

impl SmoothPart {
    /// `lipschitz_bound` must be an upper bound on the Lipschitz constant of the gradient.
    /// A nonconvex part must declare modulus 0.
    pub fn new(
        function: Arc<dyn SmoothFunction>,
        lipschitz_bound: f64,
        convexity_modulus: f64,
        nonconvex: bool,
    ) -> Result<Self> {
        if !(lipschitz_bound.is_finite() && lipschitz_bound > 0.0) {
            return Err(contract(format!(
                "lipschitz bound must be positive and finite, got {lipschitz_bound}"
            )));
        }
        if !(convexity_modulus.is_finite() && convexity_modulus >= 0.0) {
            return Err(contract(format!(
                "convexity modulus must be >= 0, got {convexity_modulus}"
            )));
        }
        if nonconvex && convexity_modulus > 0.0 {
            return Err(contract("a nonconvex smooth part cannot have a positive modulus"));
        }
        Ok(Self {
            function,
            lipschitz_bound,
            convexity_modulus,
            nonconvex,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.function.eval(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.function.grad(x)
    }

    pub fn function(&self) -> &Arc<dyn SmoothFunction> {
        &self.function
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn convexity_modulus(&self) -> f64 {
        self.convexity_modulus
    }

    pub fn is_nonconvex(&self) -> bool {
        self.nonconvex
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }
}

/// `f(x) = 0.5 (x - c)^T H (x - c) + offset` with a dense symmetric `H`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Quadratic {
    pub hessian: Vec<Vec<f64>>,
    pub center: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl Quadratic {
    pub fn new(hessian: Vec<Vec<f64>>, center: Vec<f64>, offset: f64) -> Result<Self> {
        let n = center.len();
        if n == 0 || hessian.len() != n || hessian.iter().any(|r| r.len() != n) {
            return Err(contract("quadratic hessian must be n x n with n = center length"));
        }
        for i in 0..n {
            for j in 0..i {
                if (hessian[i][j] - hessian[j][i]).abs() > 1e-12 * (1.0 + hessian[i][j].abs()) {
                    return Err(contract("quadratic hessian must be symmetric"));
                }
            }
        }
        Ok(Self {
            hessian,
            center,
            offset,
        })
    }

    pub fn diagonal(diag: &[f64], center: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        let hessian = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag[i] } else { 0.0 }).collect())
            .collect();
        Self::new(hessian, center, 0.0)
    }

    pub fn isotropic(curvature: f64, center: Vec<f64>) -> Result<Self> {
        let diag = vec![curvature; center.len()];
        Self::diagonal(&diag, center)
    }
}

impl SmoothFunction for Quadratic {
    fn kernel(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r = sub(x, &self.center);
        0.5 * dot(&r, &mat_vec(&self.hessian, &r)) + self.offset
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.hessian, &sub(x, &self.center))
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("quadratic params serialize")
    }
}

/// `f(x) = 1 - exp(-|x - c|^2)`: smooth, bounded in `[0, 1)`, nonconvex, with gradient
/// Lipschitz constant at most 2.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExpWell {
    pub center: Vec<f64>,
}

impl SmoothFunction for ExpWell {
    fn kernel(&self) -> &'static str {
        "exp_well"
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        // 1 - e^{-r} through exp_m1 keeps relative accuracy near the minimum.
        -(-norm_sq(&sub(x, &self.center))).exp_m1()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let r = sub(x, &self.center);
        let e = (-norm_sq(&r)).exp();
        r.iter().map(|ri| 2.0 * ri * e).collect()
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("exp_well params serialize")
    }
}

/// `f(x) = h(Ax)` with `h(z) = (sigma/2) |z - t|^2`; convex but not strongly convex when
/// `A` is wide.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LinearComposite {
    pub matrix: Vec<Vec<f64>>,
    pub curvature: f64,
    pub target: Vec<f64>,
}

impl LinearComposite {
    pub fn new(matrix: Vec<Vec<f64>>, curvature: f64, target: Vec<f64>) -> Result<Self> {
        if matrix.is_empty() || matrix.len() != target.len() {
            return Err(contract("linear composite needs one target per matrix row"));
        }
        let n = matrix[0].len();
        if n == 0 || matrix.iter().any(|r| r.len() != n) {
            return Err(contract("linear composite matrix rows must share a length"));
        }
        if !(curvature > 0.0) {
            return Err(contract("linear composite curvature must be positive"));
        }
        Ok(Self {
            matrix,
            curvature,
            target,
        })
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
    }

    /// Gradient of `h` at `z`.
    pub fn outer_grad(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.target)
            .map(|(zi, ti)| self.curvature * (zi - ti))
            .collect()
    }
}

impl SmoothFunction for LinearComposite {
    fn kernel(&self) -> &'static str {
        "linear_composite"
    }

    fn dim(&self) -> usize {
        self.matrix[0].len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let r = sub(&self.apply(x), &self.target);
        0.5 * self.curvature * norm_sq(&r)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let outer = self.outer_grad(&self.apply(x));
        mat_t_vec(&self.matrix, &outer, self.dim())
    }

    fn params(&self) -> Value {
        serde_json::to_value(self).expect("linear_composite params serialize")
    }
}

pub type SmoothBuilder = fn(&Value) -> Result<Arc<dyn SmoothFunction>>;

/// Name-to-constructor table for smooth kernels.
#[derive(Clone)]
pub struct SmoothKernelRegistry {
    builders: BTreeMap<&'static str, SmoothBuilder>,
}

fn parse<T: serde::de::DeserializeOwned>(kernel: &str, params: &Value) -> Result<T> {
    serde_json::from_value(params.clone())
        .map_err(|e| contract(format!("bad parameters for kernel {kernel}: {e}")))
}

impl SmoothKernelRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("quadratic", |v| {
            let q: Quadratic = parse("quadratic", v)?;
            Ok(Arc::new(Quadratic::new(q.hessian, q.center, q.offset)?))
        });
        reg.register("exp_well", |v| {
            let e: ExpWell = parse("exp_well", v)?;
            if e.center.is_empty() {
                return Err(contract("exp_well center must be non-empty"));
            }
            Ok(Arc::new(e))
        });
        reg.register("linear_composite", |v| {
            let l: LinearComposite = parse("linear_composite", v)?;
            Ok(Arc::new(LinearComposite::new(l.matrix, l.curvature, l.target)?))
        });
        reg
    }

    pub fn register(&mut self, name: &'static str, builder: SmoothBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Arc<dyn SmoothFunction>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| contract(format!("unknown smooth kernel {name:?}")))?;
        builder(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_well_is_zero_at_center_and_bounded() {
        let f = ExpWell {
            center: vec![1.0, 0.0],
        };
        assert_eq!(f.eval(&[1.0, 0.0]), 0.0);
        for x in [-30.0, -1.0, 0.3, 7.0] {
            let v = f.eval(&[x, x]);
            assert!((0.0..1.0).contains(&v) || v == 1.0 && x.abs() > 5.0);
        }
    }

    #[test]
    fn registry_round_trips_params() {
        let reg = SmoothKernelRegistry::builtin();
        let q = Quadratic::diagonal(&[1.0, 3.0], vec![0.5, -1.0]).unwrap();
        let rebuilt = reg.build(q.kernel(), &q.params()).unwrap();
        let x = [0.1, 0.2];
        assert_eq!(rebuilt.eval(&x), q.eval(&x));
        assert!(reg.build("nope", &Value::Null).is_err());
    }

    #[test]
    fn asymmetric_hessian_is_rejected() {
        assert!(Quadratic::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn composite_gradient_is_chain_rule() {
        let f = LinearComposite::new(vec![vec![1.0, 0.5, 0.0]], 2.0, vec![0.3]).unwrap();
        let x = [0.2, -0.4, 1.0];
        let z = 0.2 - 0.2;
        let g = f.grad(&x);
        let expect = [2.0 * (z - 0.3), 2.0 * (z - 0.3) * 0.5, 0.0];
        for (a, b) in g.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
