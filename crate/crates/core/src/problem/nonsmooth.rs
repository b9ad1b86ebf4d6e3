//! Nonsmooth convex parts `g_i`.
//!
//! A part is classified by what the subproblem solvers can do with it: nothing at all
//! (`Zero`), a coordinatewise prox, a full-vector prox, projection onto a box, or only
//! a subgradient oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{contract, Result};
use crate::linalg::norm;

/// `g(x) = sum_j phi(x_j)` for a closed convex scalar `phi`.
pub trait ScalarProx: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn eval(&self, t: f64) -> f64;
    /// `argmin_s alpha * phi(s) + 0.5 (s - t)^2`
    fn prox(&self, t: f64, alpha: f64) -> f64;
    fn subgradient(&self, t: f64) -> f64;
    /// Derivative of `t -> prox(t, alpha)` where it is locally affine, else `None`.
    fn prox_slope(&self, _t: f64, _alpha: f64) -> Option<f64> {
        None
    }
    fn modulus(&self) -> f64 {
        0.0
    }
    /// Lipschitz constant of `phi` on `[lo, hi]`.
    fn lipschitz_on(&self, lo: f64, hi: f64) -> f64;
    fn params(&self) -> Value;
}

/// A convex function with a computable full-vector prox.
pub trait ProxOperator: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn eval(&self, x: &[f64]) -> f64;
    /// `argmin_y alpha * g(y) + 0.5 |y - z|^2`
    fn prox(&self, z: &[f64], alpha: f64) -> Vec<f64>;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;
    /// Jacobian of `z -> prox_{alpha g}(z)` where it exists.
    fn prox_jacobian(&self, _z: &[f64], _alpha: f64) -> Option<Vec<Vec<f64>>> {
        None
    }
    fn modulus(&self) -> f64 {
        0.0
    }
    fn lipschitz(&self) -> Option<f64>;
    fn params(&self) -> Value;
}

/// Jacobian of a map `R^n -> R^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum Jacobian {
    Diagonal(Vec<f64>),
    Dense(Vec<Vec<f64>>),
}

impl Jacobian {
    pub fn scaled(self, c: f64) -> Self {
        match self {
            Jacobian::Diagonal(d) => Jacobian::Diagonal(d.into_iter().map(|v| v * c).collect()),
            Jacobian::Dense(a) => Jacobian::Dense(
                a.into_iter()
                    .map(|row| row.into_iter().map(|v| v * c).collect())
                    .collect(),
            ),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            Jacobian::Dense(a) => a.iter().map(|row| crate::linalg::dot(row, v)).collect(),
        }
    }
}

/// A finite convex function known only through values and subgradients.
pub trait SubgradientOracle: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn eval(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;
    fn modulus(&self) -> f64 {
        0.0
    }
    fn lipschitz(&self) -> Option<f64>;
    fn params(&self) -> Value;
}

#[derive(Clone, Debug)]
pub enum NonsmoothKind {
    Zero,
    SeparableProx(Arc<dyn ScalarProx>),
    SharedProx(Arc<dyn ProxOperator>),
    BoxIndicator { lower: Vec<f64>, upper: Vec<f64> },
    GeneralConvex(Arc<dyn SubgradientOracle>),
}

/// `g_i` and its convexity modulus `nu_i`.
#[derive(Clone, Debug)]
pub struct NonsmoothPart {
    kind: NonsmoothKind,
    modulus: f64,
}

impl NonsmoothPart {
    pub fn new(kind: NonsmoothKind) -> Result<Self> {
        if let NonsmoothKind::BoxIndicator { lower, upper } = &kind {
            if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                return Err(contract("box indicator needs lower <= upper per coordinate"));
            }
        }
        let modulus = match &kind {
            NonsmoothKind::Zero | NonsmoothKind::BoxIndicator { .. } => 0.0,
            NonsmoothKind::SeparableProx(p) => p.modulus(),
            NonsmoothKind::SharedProx(p) => p.modulus(),
            NonsmoothKind::GeneralConvex(o) => o.modulus(),
        };
        Ok(Self { kind, modulus })
    }

    pub fn zero() -> Self {
        Self {
            kind: NonsmoothKind::Zero,
            modulus: 0.0,
        }
    }

    pub fn l1(weight: f64) -> Result<Self> {
        Self::new(NonsmoothKind::SeparableProx(Arc::new(AbsValue::new(weight)?)))
    }

    pub fn elastic_net(l1: f64, l2: f64) -> Result<Self> {
        Self::new(NonsmoothKind::SeparableProx(Arc::new(ElasticNet::new(l1, l2)?)))
    }

    pub fn box_indicator(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::new(NonsmoothKind::BoxIndicator { lower, upper })
    }

    pub fn kind(&self) -> &NonsmoothKind {
        &self.kind
    }

    pub fn convexity_modulus(&self) -> f64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonsmoothKind::Zero)
    }

    pub fn has_prox(&self) -> bool {
        !matches!(self.kind, NonsmoothKind::GeneralConvex(_))
    }

    pub fn is_box(&self) -> bool {
        matches!(self.kind, NonsmoothKind::BoxIndicator { .. })
    }

    /// Dimension the part is tied to, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match &self.kind {
            NonsmoothKind::BoxIndicator { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    /// `g(x)`, `+inf` outside the domain.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NonsmoothKind::Zero => 0.0,
            NonsmoothKind::SeparableProx(p) => x.iter().map(|&t| p.eval(t)).sum(),
            NonsmoothKind::SharedProx(p) => p.eval(x),
            NonsmoothKind::BoxIndicator { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (l, u))| l <= v && v <= u);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            NonsmoothKind::GeneralConvex(o) => o.eval(x),
        }
    }

    /// `prox_{alpha g}(z)`; `None` when only a subgradient oracle is available.
    pub fn prox(&self, z: &[f64], alpha: f64) -> Option<Vec<f64>> {
        match &self.kind {
            NonsmoothKind::Zero => Some(z.to_vec()),
            NonsmoothKind::SeparableProx(p) => Some(z.iter().map(|&t| p.prox(t, alpha)).collect()),
            NonsmoothKind::SharedProx(p) => Some(p.prox(z, alpha)),
            NonsmoothKind::BoxIndicator { lower, upper } => Some(
                z.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| v.clamp(*l, *u))
                    .collect(),
            ),
            NonsmoothKind::GeneralConvex(_) => None,
        }
    }

    /// Diagonal Jacobian of `z -> prox_{alpha g}(z)` when the prox is separable and
    /// locally affine at `z`.
    pub fn prox_slope(&self, z: &[f64], alpha: f64) -> Option<Vec<f64>> {
        match &self.kind {
            NonsmoothKind::Zero => Some(vec![1.0; z.len()]),
            NonsmoothKind::SeparableProx(p) => z.iter().map(|&t| p.prox_slope(t, alpha)).collect(),
            NonsmoothKind::BoxIndicator { lower, upper } => Some(
                z.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| if l < v && v < u { 1.0 } else { 0.0 })
                    .collect(),
            ),
            NonsmoothKind::SharedProx(_) | NonsmoothKind::GeneralConvex(_) => None,
        }
    }

    /// Jacobian of `z -> prox_{alpha g}(z)`, diagonal whenever the prox is separable.
    pub fn prox_jacobian(&self, z: &[f64], alpha: f64) -> Option<Jacobian> {
        match &self.kind {
            NonsmoothKind::SharedProx(p) => p.prox_jacobian(z, alpha).map(Jacobian::Dense),
            _ => self.prox_slope(z, alpha).map(Jacobian::Diagonal),
        }
    }

    /// An element of `dg(x)`; `None` outside the domain. For a box this is the zero
    /// vector, which lies in every normal cone.
    pub fn subgradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.kind {
            NonsmoothKind::Zero => Some(vec![0.0; x.len()]),
            NonsmoothKind::SeparableProx(p) => Some(x.iter().map(|&t| p.subgradient(t)).collect()),
            NonsmoothKind::SharedProx(p) => Some(p.subgradient(x)),
            NonsmoothKind::BoxIndicator { .. } => {
                if self.eval(x).is_finite() {
                    Some(vec![0.0; x.len()])
                } else {
                    None
                }
            }
            NonsmoothKind::GeneralConvex(o) => Some(o.subgradient(x)),
        }
    }

    /// Lipschitz constant of `g` on the box `[lo, hi]`, restricted to its domain.
    pub fn lipschitz_on(&self, lo: &[f64], hi: &[f64]) -> Option<f64> {
        match &self.kind {
            NonsmoothKind::Zero | NonsmoothKind::BoxIndicator { .. } => Some(0.0),
            NonsmoothKind::SeparableProx(p) => {
                let sq: f64 = lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| p.lipschitz_on(*l, *h).powi(2))
                    .sum();
                Some(sq.sqrt())
            }
            NonsmoothKind::SharedProx(p) => p.lipschitz(),
            NonsmoothKind::GeneralConvex(o) => o.lipschitz(),
        }
    }

    /// Whether two parts are the same function, so one prox serves both.
    pub fn same_as(&self, other: &NonsmoothPart) -> bool {
        use NonsmoothKind::*;
        match (&self.kind, &other.kind) {
            (Zero, Zero) => true,
            (BoxIndicator { lower: l1, upper: u1 }, BoxIndicator { lower: l2, upper: u2 }) => {
                l1 == l2 && u1 == u2
            }
            (SeparableProx(a), SeparableProx(b)) => {
                Arc::ptr_eq(a, b) || (a.name() == b.name() && a.params() == b.params())
            }
            (SharedProx(a), SharedProx(b)) => {
                Arc::ptr_eq(a, b) || (a.name() == b.name() && a.params() == b.params())
            }
            _ => false,
        }
    }

    /// Registry name and parameters of this part.
    pub fn describe(&self) -> (String, Value) {
        match &self.kind {
            NonsmoothKind::Zero => ("zero".into(), json!({})),
            NonsmoothKind::SeparableProx(p) => (p.name().into(), p.params()),
            NonsmoothKind::SharedProx(p) => (p.name().into(), p.params()),
            NonsmoothKind::BoxIndicator { lower, upper } => {
                ("box".into(), json!({ "lower": lower, "upper": upper }))
            }
            NonsmoothKind::GeneralConvex(o) => (o.name().into(), o.params()),
        }
    }
}

fn check_weight(w: f64) -> Result<f64> {
    if w.is_finite() && w >= 0.0 {
        Ok(w)
    } else {
        Err(contract(format!("weight must be finite and >= 0, got {w}")))
    }
}

/// Soft-thresholding: `sign(t) max(|t| - kappa, 0)`.
pub fn soft_threshold(t: f64, kappa: f64) -> f64 {
    if t > kappa {
        t - kappa
    } else if t < -kappa {
        t + kappa
    } else {
        0.0
    }
}

/// `phi(t) = weight * |t|`, so `g = weight * |x|_1`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AbsValue {
    pub weight: f64,
}

impl AbsValue {
    pub fn new(weight: f64) -> Result<Self> {
        Ok(Self {
            weight: check_weight(weight)?,
        })
    }
}

impl ScalarProx for AbsValue {
    fn name(&self) -> &'static str {
        "l1"
    }
    fn eval(&self, t: f64) -> f64 {
        self.weight * t.abs()
    }
    fn prox(&self, t: f64, alpha: f64) -> f64 {
        soft_threshold(t, alpha * self.weight)
    }
    fn subgradient(&self, t: f64) -> f64 {
        if t > 0.0 {
            self.weight
        } else if t < 0.0 {
            -self.weight
        } else {
            0.0
        }
    }
    fn prox_slope(&self, t: f64, alpha: f64) -> Option<f64> {
        Some(if t.abs() > alpha * self.weight { 1.0 } else { 0.0 })
    }
    fn lipschitz_on(&self, _lo: f64, _hi: f64) -> f64 {
        self.weight
    }
    fn params(&self) -> Value {
        serde_json::to_value(self).expect("l1 params serialize")
    }
}

/// `phi(t) = l1 |t| + (l2/2) t^2`, strongly convex with modulus `l2`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ElasticNet {
    pub l1: f64,
    pub l2: f64,
}

impl ElasticNet {
    pub fn new(l1: f64, l2: f64) -> Result<Self> {
        Ok(Self {
            l1: check_weight(l1)?,
            l2: check_weight(l2)?,
        })
    }
}

impl ScalarProx for ElasticNet {
    fn name(&self) -> &'static str {
        "elastic_net"
    }
    fn eval(&self, t: f64) -> f64 {
        self.l1 * t.abs() + 0.5 * self.l2 * t * t
    }
    fn prox(&self, t: f64, alpha: f64) -> f64 {
        soft_threshold(t, alpha * self.l1) / (1.0 + alpha * self.l2)
    }
    fn subgradient(&self, t: f64) -> f64 {
        let s = if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.l1 * s + self.l2 * t
    }
    fn prox_slope(&self, t: f64, alpha: f64) -> Option<f64> {
        Some(if t.abs() > alpha * self.l1 {
            1.0 / (1.0 + alpha * self.l2)
        } else {
            0.0
        })
    }
    fn modulus(&self) -> f64 {
        self.l2
    }
    fn lipschitz_on(&self, lo: f64, hi: f64) -> f64 {
        self.l1 + self.l2 * lo.abs().max(hi.abs())
    }
    fn params(&self) -> Value {
        serde_json::to_value(self).expect("elastic_net params serialize")
    }
}

/// `g(x) = weight * |x|_2` (group lasso with a single group).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EuclideanNorm {
    pub weight: f64,
}

impl ProxOperator for EuclideanNorm {
    fn name(&self) -> &'static str {
        "l2_norm"
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.weight * norm(x)
    }
    fn prox(&self, z: &[f64], alpha: f64) -> Vec<f64> {
        let nz = norm(z);
        let kappa = alpha * self.weight;
        if nz <= kappa {
            vec![0.0; z.len()]
        } else {
            let s = 1.0 - kappa / nz;
            z.iter().map(|v| v * s).collect()
        }
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let nx = norm(x);
        if nx == 0.0 {
            vec![0.0; x.len()]
        } else {
            x.iter().map(|v| self.weight * v / nx).collect()
        }
    }
    /// `(1 - k/|z|) I + k z z^T / |z|^3` outside the ball of radius `k = alpha * weight`.
    fn prox_jacobian(&self, z: &[f64], alpha: f64) -> Option<Vec<Vec<f64>>> {
        let nz = norm(z);
        let kappa = alpha * self.weight;
        let n = z.len();
        if nz <= kappa {
            return Some(vec![vec![0.0; n]; n]);
        }
        let s = 1.0 - kappa / nz;
        let c = kappa / (nz * nz * nz);
        Some(
            (0..n)
                .map(|i| (0..n).map(|j| c * z[i] * z[j] + if i == j { s } else { 0.0 }).collect())
                .collect(),
        )
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }
    fn params(&self) -> Value {
        serde_json::to_value(self).expect("l2_norm params serialize")
    }
}

/// `g(x) = weight * max_j |x_j|`, exposed only through subgradients.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MaxAbs {
    pub weight: f64,
}

impl SubgradientOracle for MaxAbs {
    fn name(&self) -> &'static str {
        "linf"
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.weight * x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let (idx, val) = x
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if val > 0.0 {
            g[idx] = self.weight * x[idx].signum();
        }
        g
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }
    fn params(&self) -> Value {
        serde_json::to_value(self).expect("linf params serialize")
    }
}

pub type NonsmoothBuilder = fn(&Value) -> Result<NonsmoothPart>;

/// Name-to-constructor table for nonsmooth parts.
#[derive(Clone)]
pub struct NonsmoothRegistry {
    builders: BTreeMap<&'static str, NonsmoothBuilder>,
}

fn parse<T: serde::de::DeserializeOwned>(kind: &str, params: &Value) -> Result<T> {
    serde_json::from_value(params.clone())
        .map_err(|e| contract(format!("bad parameters for nonsmooth kind {kind}: {e}")))
}

#[derive(Deserialize)]
struct BoxParams {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl NonsmoothRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self {
            builders: BTreeMap::new(),
        };
        reg.register("zero", |_| Ok(NonsmoothPart::zero()));
        reg.register("l1", |v| NonsmoothPart::l1(parse::<AbsValue>("l1", v)?.weight));
        reg.register("elastic_net", |v| {
            let e: ElasticNet = parse("elastic_net", v)?;
            NonsmoothPart::elastic_net(e.l1, e.l2)
        });
        reg.register("l2_norm", |v| {
            let e: EuclideanNorm = parse("l2_norm", v)?;
            check_weight(e.weight)?;
            NonsmoothPart::new(NonsmoothKind::SharedProx(Arc::new(e)))
        });
        reg.register("linf", |v| {
            let e: MaxAbs = parse("linf", v)?;
            check_weight(e.weight)?;
            NonsmoothPart::new(NonsmoothKind::GeneralConvex(Arc::new(e)))
        });
        reg.register("box", |v| {
            let b: BoxParams = parse("box", v)?;
            NonsmoothPart::box_indicator(b.lower, b.upper)
        });
        reg
    }

    pub fn register(&mut self, name: &'static str, builder: NonsmoothBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<NonsmoothPart> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| contract(format!("unknown nonsmooth kind {name:?}")))?;
        builder(params)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }
}
