//! Benchmark families with analytic ground truth, one per rate regime.
//!
//! Every `u_0` closed form below comes from the dual representation
//! `u_0(x) = min_{lambda in simplex} [sum_i lambda_i F_i(x) - inf_y sum_i lambda_i F_i(y)]`,
//! valid for convex objectives. For two objectives the weighted sum depends on one scalar,
//! and the inner infimum is explicit for each family.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algorithm::RunConfig;
use crate::error::{contract, Result};
use crate::linalg::{dot, norm_sq, sub};
use crate::problem::{
    soft_threshold, ExpWell, GroundTruth, LinearComposite, NonsmoothPart, Objective, ProblemSpec, Quadratic,
    SmoothPart, TestBox, U0Value,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    NonconvexBoundedBelow,
    Convex,
    StronglyConvex,
    ProximalPL,
}

/// The four global rate guarantees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    NonconvexW1,
    ConvexU0,
    StronglyConvexLinear,
    PlLinear,
}

impl Theorem {
    pub const ALL: [Theorem; 4] = [
        Theorem::NonconvexW1,
        Theorem::ConvexU0,
        Theorem::StronglyConvexLinear,
        Theorem::PlLinear,
    ];

    /// Short name used on the command line.
    pub fn bound_name(self) -> &'static str {
        match self {
            Theorem::NonconvexW1 => "nonconvex",
            Theorem::ConvexU0 => "convex",
            Theorem::StronglyConvexLinear => "strong",
            Theorem::PlLinear => "pl",
        }
    }

    pub fn from_bound_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.bound_name() == name)
    }
}

/// The start point and configuration a benchmark is verified with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRun {
    pub x0: Vec<f64>,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct BenchmarkEntry {
    pub id: String,
    pub family: String,
    pub n: usize,
    pub params: Value,
    pub spec: Arc<ProblemSpec>,
    pub regime: Regime,
    /// Theorems whose hypotheses the entry satisfies.
    pub theorems: Vec<Theorem>,
    pub canonical: CanonicalRun,
}

impl BenchmarkEntry {
    pub fn ground_truth(&self) -> &GroundTruth {
        self.spec.ground_truth().expect("benchmarks carry ground truth")
    }

    pub fn supports(&self, t: Theorem) -> bool {
        self.theorems.contains(&t)
    }
}

/// A parameterized benchmark family, registered by name.
pub trait BenchmarkFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn default_params(&self) -> Value {
        json!({})
    }
    fn build(&self, n: usize, params: &Value) -> Result<BenchmarkEntry>;
}

fn e1(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n];
    a[0] = 1.0;
    a
}

fn expect_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(contract(format!("dimension must be >= {min}, got {n}")))
    } else {
        Ok(())
    }
}

fn unit_quadratic(center: Vec<f64>) -> SmoothPart {
    SmoothPart::new(
        Arc::new(Quadratic::isotropic(1.0, center).expect("non-empty center")),
        1.0,
        1.0,
        false,
    )
    .expect("valid constants")
}

fn param(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| contract(format!("parameter {key} must be a number"))),
    }
}

/// Rounding allowance for closed forms that are sums of nonnegative terms.
fn rounding_gap(value: f64) -> f64 {
    8.0 * f64::EPSILON * value
}

// ---------------------------------------------------------------------------------------
// biquad: F_1 = |x - a|^2/2, F_2 = |x + a|^2/2 with a = e_1.

/// The weighted sum is `|y - s a|^2/2 + (1 - s^2)/2` with `s = lambda_1 - lambda_2`, so
/// `u_0(x) = min_{s in [-1, 1]} |x - s a|^2 / 2`: half the squared distance to `[-a, a]`.
pub fn biquad_u0(x: &[f64]) -> f64 {
    let s = x[0].clamp(-1.0, 1.0);
    let perp: f64 = x[1..].iter().map(|v| v * v).sum();
    0.5 * ((x[0] - s).powi(2) + perp)
}

/// `R` for a start `x0`: the Pareto points `s a` inside the level set of `F(x0)` form the
/// interval of `s` with `|s - 1| <= sqrt(2 F_1(x0))` and `|s + 1| <= sqrt(2 F_2(x0))`;
/// each Pareto value has the single preimage `s a`, so `R` is the largest `|s a - x0|^2`.
pub fn biquad_r(x0: &[f64]) -> Option<f64> {
    let a = e1(x0.len());
    let r1 = (norm_sq(&sub(x0, &a))).sqrt();
    let minus: Vec<f64> = a.iter().map(|v| -v).collect();
    let r2 = (norm_sq(&sub(x0, &minus))).sqrt();
    let lo = (-1.0_f64).max(1.0 - r1).max(-1.0 - r2);
    let hi = 1.0_f64.min(1.0 + r1).min(-1.0 + r2);
    if lo > hi {
        return None;
    }
    let perp: f64 = x0[1..].iter().map(|v| v * v).sum();
    let far = (lo - x0[0]).abs().max((hi - x0[0]).abs());
    Some(far * far + perp)
}

pub struct Biquad;

impl BenchmarkFamily for Biquad {
    fn name(&self) -> &'static str {
        "biquad"
    }

    fn build(&self, n: usize, _params: &Value) -> Result<BenchmarkEntry> {
        expect_n(n, 1)?;
        let a = e1(n);
        let minus: Vec<f64> = a.iter().map(|v| -v).collect();
        let truth = GroundTruth {
            pareto_set: Some("segment [-a, a] with a = e_1".into()),
            u0: Some(Arc::new(|x: &[f64]| {
                let v = biquad_u0(x);
                U0Value {
                    value: v,
                    gap: rounding_gap(v),
                }
            })),
            r_constant: Some(Arc::new(biquad_r)),
            f_min: Some(0.0),
            tau: Some(1.0),
        };
        let id = format!("biquad{n}");
        let spec = ProblemSpec::new(
            id.clone(),
            vec![
                Objective::smooth_only(unit_quadratic(a)),
                Objective::smooth_only(unit_quadratic(minus)),
            ],
            TestBox::cube(n, 3.0)?,
        )?
        .with_ground_truth(truth);
        let mut x0 = vec![0.0; n];
        x0[0] = 2.0;
        if n > 1 {
            x0[1] = 1.0;
        }
        Ok(BenchmarkEntry {
            id,
            family: self.name().into(),
            n,
            params: json!({}),
            spec: Arc::new(spec),
            regime: Regime::StronglyConvex,
            theorems: vec![Theorem::ConvexU0, Theorem::StronglyConvexLinear, Theorem::PlLinear],
            canonical: CanonicalRun {
                x0,
                config: RunConfig::fixed(2.0, 200).with_u0().with_w1().with_stop_tol(0.0),
            },
        })
    }
}

// ---------------------------------------------------------------------------------------
// l1quad / l1ridge: the biquad smooth parts plus a shared g = lam |x|_1 + (rho/2)|x|^2.

/// With `q = 1 + rho`, the inner infimum is `1/2 - soft(s, lam)^2 / (2q)` and
/// `u_0(x) = min_s (q/2)|x_perp|^2 + lam |x_perp|_1 + B(s)`, where
/// `B(s) = (q/2) x_1^2 - s x_1 + lam |x_1| + soft(s, lam)^2/(2q)` is convex with minimizer
/// `s = q x_1 + sign(x_1) lam` clamped to `[-1, 1]`. `B` is evaluated as a sum of
/// nonnegative terms to keep relative accuracy near the Pareto set.
pub fn l1ridge_u0(x: &[f64], lam: f64, rho: f64) -> f64 {
    let q = 1.0 + rho;
    let x1 = x[0];
    let s = if x1 > 0.0 {
        q * x1 + lam
    } else if x1 < 0.0 {
        q * x1 - lam
    } else {
        0.0
    }
    .clamp(-1.0, 1.0);
    let sigma = soft_threshold(s, lam);
    let bracket = if s >= lam {
        (q * x1 - sigma).powi(2) / (2.0 * q) + lam * (x1.abs() - x1)
    } else if s <= -lam {
        (q * x1 - sigma).powi(2) / (2.0 * q) + lam * (x1.abs() + x1)
    } else {
        0.5 * q * x1 * x1 + (lam * x1.abs() - s * x1)
    };
    let perp_sq: f64 = x[1..].iter().map(|v| v * v).sum();
    let perp_l1: f64 = x[1..].iter().map(|v| v.abs()).sum();
    0.5 * q * perp_sq + lam * perp_l1 + bracket
}

fn l1_family(
    family: &'static str,
    n: usize,
    lam: f64,
    rho: f64,
    g: impl Fn() -> Result<NonsmoothPart>,
) -> Result<BenchmarkEntry> {
    expect_n(n, 1)?;
    let a = e1(n);
    let minus: Vec<f64> = a.iter().map(|v| -v).collect();
    let truth = GroundTruth {
        pareto_set: Some("soft-thresholded points of the segment [-a, a]".into()),
        u0: Some(Arc::new(move |x: &[f64]| {
            let v = l1ridge_u0(x, lam, rho);
            U0Value {
                value: v,
                gap: rounding_gap(v),
            }
        })),
        r_constant: None,
        f_min: Some(0.0),
        tau: Some(1.0),
    };
    let id = format!("{family}{n}");
    let spec = ProblemSpec::new(
        id.clone(),
        vec![
            Objective::new(unit_quadratic(a), g()?),
            Objective::new(unit_quadratic(minus), g()?),
        ],
        TestBox::cube(n, 3.0)?,
    )?
    .with_ground_truth(truth);
    let mut x0 = vec![0.0; n];
    x0[0] = 2.5;
    if n > 1 {
        x0[1] = -1.5;
    }
    let params = if family == "l1quad" {
        json!({ "lam": lam })
    } else {
        json!({ "lam": lam, "ridge": rho })
    };
    Ok(BenchmarkEntry {
        id,
        family: family.into(),
        n,
        params,
        spec: Arc::new(spec),
        regime: Regime::StronglyConvex,
        theorems: vec![Theorem::StronglyConvexLinear, Theorem::PlLinear],
        canonical: CanonicalRun {
            x0,
            config: RunConfig::fixed(2.0, 200).with_u0().with_w1().with_stop_tol(0.0),
        },
    })
}

pub struct L1Quad;

impl BenchmarkFamily for L1Quad {
    fn name(&self) -> &'static str {
        "l1quad"
    }

    fn default_params(&self) -> Value {
        json!({ "lam": 0.3 })
    }

    fn build(&self, n: usize, params: &Value) -> Result<BenchmarkEntry> {
        let lam = param(params, "lam", 0.3)?;
        l1_family("l1quad", n, lam, 0.0, || NonsmoothPart::l1(lam))
    }
}

pub struct L1Ridge;

impl BenchmarkFamily for L1Ridge {
    fn name(&self) -> &'static str {
        "l1ridge"
    }

    fn default_params(&self) -> Value {
        json!({ "lam": 0.3, "ridge": 0.5 })
    }

    fn build(&self, n: usize, params: &Value) -> Result<BenchmarkEntry> {
        let lam = param(params, "lam", 0.3)?;
        let rho = param(params, "ridge", 0.5)?;
        l1_family("l1ridge", n, lam, rho, || NonsmoothPart::elastic_net(lam, rho))
    }
}

// ---------------------------------------------------------------------------------------
// boxpl: f_i = (sigma_i/2)|A x - t_i|^2 with a shared wide A, g_i = indicator of [-2, 2]^n.

pub const BOX_HALF_WIDTH: f64 = 2.0;
const BOX_SIGMA: [f64; 2] = [1.0, 2.0];

/// `A` has `floor(n/2)` rows with `A[r][2r] = 1`, `A[r][2r+1] = 1/2`.
pub fn box_linear_matrix(n: usize) -> Vec<Vec<f64>> {
    (0..n / 2)
        .map(|r| {
            let mut row = vec![0.0; n];
            row[2 * r] = 1.0;
            row[2 * r + 1] = 0.5;
            row
        })
        .collect()
}

pub fn box_linear_targets(n: usize) -> (Vec<f64>, Vec<f64>) {
    let k = n / 2;
    let sign = |r: usize| if r % 2 == 0 { 1.0 } else { -1.0 };
    (
        (0..k).map(|r| 0.8 * sign(r)).collect(),
        (0..k).map(|r| -0.5 * sign(r)).collect(),
    )
}

/// With `lambda_1 = t`, `S(t) = t sigma_1 + (1 - t) sigma_2` and `z = A x`,
/// the gap is `D(t) = |S z - t sigma_1 t_1 - (1 - t) sigma_2 t_2|^2 / (2 S)`, since the
/// weighted target is reachable inside the box. `D` is convex on `[0, 1]`; its stationary
/// points solve a quadratic, so the minimum is over those roots and the endpoints.
pub fn box_linear_u0(a: &[Vec<f64>], t1: &[f64], t2: &[f64], x: &[f64]) -> f64 {
    let z: Vec<f64> = a.iter().map(|row| dot(row, x)).collect();
    let (s1, s2) = (BOX_SIGMA[0], BOX_SIGMA[1]);
    // u(t) = u0 + t u1 and S(t) = s2 + t (s1 - s2).
    let u0: Vec<f64> = z.iter().zip(t2).map(|(z, t)| s2 * (z - t)).collect();
    let u1: Vec<f64> = z
        .iter()
        .zip(t1.iter().zip(t2))
        .map(|(z, (a, b))| (s1 - s2) * z - s1 * a + s2 * b)
        .collect();
    let d = |t: f64| -> f64 {
        let s = s2 + t * (s1 - s2);
        let u: Vec<f64> = u0.iter().zip(&u1).map(|(a, b)| a + t * b).collect();
        norm_sq(&u) / (2.0 * s)
    };
    let mut cands = vec![0.0, 1.0];
    // d/dt [|u|^2 / S] = 0  <=>  2 (u . u1) S - |u|^2 S' = 0, a quadratic in t.
    let (al, be, ga) = (norm_sq(&u1), dot(&u0, &u1), norm_sq(&u0));
    let sp = s1 - s2;
    let c2 = 2.0 * al * sp - al * sp;
    let c1 = 2.0 * (be * sp + al * s2) - 2.0 * be * sp;
    let c0 = 2.0 * be * s2 - ga * sp;
    if c2.abs() > 1e-300 {
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc >= 0.0 {
            let r = disc.sqrt();
            cands.push((-c1 + r) / (2.0 * c2));
            cands.push((-c1 - r) / (2.0 * c2));
        }
    } else if c1.abs() > 1e-300 {
        cands.push(-c0 / c1);
    }
    cands
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .map(d)
        .fold(f64::INFINITY, f64::min)
}

/// `box_linear_pl(n)` with explicit targets, e.g. equal ones so that a common minimizer exists.
pub fn box_linear_pl_with_targets(n: usize, t1: Vec<f64>, t2: Vec<f64>) -> Result<BenchmarkEntry> {
    expect_n(n, 2)?;
    let a = box_linear_matrix(n);
    if t1.len() != a.len() || t2.len() != a.len() {
        return Err(contract("one target per row of A is required"));
    }
    if t1.iter().chain(&t2).any(|t| t.abs() > 1.5 * BOX_HALF_WIDTH / 2.0) {
        return Err(contract("targets must be reachable inside the box"));
    }
    let norm_a_sq = 1.25;
    let mk = |sigma: f64, t: &[f64]| -> Result<SmoothPart> {
        let f = LinearComposite::new(a.clone(), sigma, t.to_vec())?;
        SmoothPart::new(Arc::new(f), sigma * norm_a_sq, 0.0, false)
    };
    let bx = || NonsmoothPart::box_indicator(vec![-BOX_HALF_WIDTH; n], vec![BOX_HALF_WIDTH; n]);
    let (ta, tb, am) = (t1.clone(), t2.clone(), a.clone());
    let truth = GroundTruth {
        pareto_set: Some("box points with A x on the segment between the weighted targets".into()),
        u0: Some(Arc::new(move |x: &[f64]| {
            let v = box_linear_u0(&am, &ta, &tb, x);
            U0Value {
                value: v,
                gap: 1e-12 * v + 1e-300,
            }
        })),
        r_constant: None,
        f_min: Some(0.0),
        tau: None,
    };
    let id = format!("boxpl{n}");
    let spec = ProblemSpec::new(
        id.clone(),
        vec![
            Objective::new(mk(BOX_SIGMA[0], &t1)?, bx()?),
            Objective::new(mk(BOX_SIGMA[1], &t2)?, bx()?),
        ],
        TestBox::cube(n, BOX_HALF_WIDTH)?,
    )?
    .with_ground_truth(truth);
    let x0: Vec<f64> = (0..n)
        .map(|j| match j % 3 {
            0 => -1.95,
            1 => 1.99,
            _ => 1.5,
        })
        .collect();
    Ok(BenchmarkEntry {
        id,
        family: "boxpl".into(),
        n,
        params: json!({ "t1": t1, "t2": t2 }),
        spec: Arc::new(spec),
        regime: Regime::ProximalPL,
        theorems: vec![Theorem::PlLinear],
        canonical: CanonicalRun {
            x0,
            config: RunConfig::fixed(3.0, 60).with_u0().with_w1().with_stop_tol(0.0),
        },
    })
}

pub struct BoxLinearPl;

impl BenchmarkFamily for BoxLinearPl {
    fn name(&self) -> &'static str {
        "boxpl"
    }

    fn build(&self, n: usize, params: &Value) -> Result<BenchmarkEntry> {
        expect_n(n, 2)?;
        let (d1, d2) = box_linear_targets(n);
        let pick = |key: &str, default: Vec<f64>| -> Result<Vec<f64>> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| contract(format!("parameter {key}: {e}"))),
            }
        };
        box_linear_pl_with_targets(n, pick("t1", d1)?, pick("t2", d2)?)
    }
}

// ---------------------------------------------------------------------------------------
// noncvx: F_i = 1 - exp(-|x -+ a|^2), bounded below by 0, gradient Lipschitz constant <= 2.

pub struct NoncvxExp;

impl BenchmarkFamily for NoncvxExp {
    fn name(&self) -> &'static str {
        "noncvx"
    }

    fn build(&self, n: usize, _params: &Value) -> Result<BenchmarkEntry> {
        expect_n(n, 1)?;
        let a = e1(n);
        let minus: Vec<f64> = a.iter().map(|v| -v).collect();
        let mk = |c: Vec<f64>| SmoothPart::new(Arc::new(ExpWell { center: c }), 2.0, 0.0, true);
        let truth = GroundTruth {
            pareto_set: Some("segment [-a, a] with a = e_1".into()),
            u0: None,
            r_constant: None,
            f_min: Some(0.0),
            tau: None,
        };
        let id = format!("noncvx{n}");
        let spec = ProblemSpec::new(
            id.clone(),
            vec![Objective::smooth_only(mk(a)?), Objective::smooth_only(mk(minus)?)],
            TestBox::cube(n, 3.0)?,
        )?
        .with_ground_truth(truth);
        let x0: Vec<f64> = match n {
            1 => vec![1.4],
            2 => vec![1.5, 1.0],
            _ => (0..n).map(|j| [1.2, -0.8, 0.5, 0.3, -0.2][j % 5]).collect(),
        };
        Ok(BenchmarkEntry {
            id,
            family: self.name().into(),
            n,
            params: json!({}),
            spec: Arc::new(spec),
            regime: Regime::NonconvexBoundedBelow,
            theorems: vec![Theorem::NonconvexW1],
            canonical: CanonicalRun {
                x0,
                config: RunConfig::fixed(2.5, 200).with_w1().with_stop_tol(0.0),
            },
        })
    }
}

pub fn biquad(n: usize) -> Result<BenchmarkEntry> {
    Biquad.build(n, &json!({}))
}

pub fn l1quad(n: usize, lam: f64) -> Result<BenchmarkEntry> {
    L1Quad.build(n, &json!({ "lam": lam }))
}

pub fn l1quad_ridge(n: usize, lam: f64, ridge: f64) -> Result<BenchmarkEntry> {
    L1Ridge.build(n, &json!({ "lam": lam, "ridge": ridge }))
}

pub fn box_linear_pl(n: usize) -> Result<BenchmarkEntry> {
    BoxLinearPl.build(n, &json!({}))
}

pub fn noncvx_exp(n: usize) -> Result<BenchmarkEntry> {
    NoncvxExp.build(n, &json!({}))
}

/// Benchmark families by name; ids are the family name followed by the dimension.
#[derive(Clone)]
pub struct BenchmarkRegistry {
    families: BTreeMap<&'static str, Arc<dyn BenchmarkFamily>>,
    suite: Vec<(&'static str, usize)>,
}

impl BenchmarkRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self {
            families: BTreeMap::new(),
            suite: Vec::new(),
        };
        reg.register(Arc::new(Biquad));
        reg.register(Arc::new(L1Quad));
        reg.register(Arc::new(L1Ridge));
        reg.register(Arc::new(BoxLinearPl));
        reg.register(Arc::new(NoncvxExp));
        reg.suite = vec![
            ("biquad", 1),
            ("biquad", 2),
            ("l1quad", 2),
            ("l1ridge", 2),
            ("boxpl", 3),
            ("noncvx", 1),
            ("noncvx", 2),
            ("noncvx", 5),
        ];
        reg
    }

    pub fn register(&mut self, family: Arc<dyn BenchmarkFamily>) {
        self.families.insert(family.name(), family);
    }

    pub fn family(&self, name: &str) -> Option<&Arc<dyn BenchmarkFamily>> {
        self.families.get(name)
    }

    pub fn family_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.families.keys().copied()
    }

    /// Splits `"biquad12"` into `("biquad", 12)`.
    pub fn parse_id(id: &str) -> Option<(&str, usize)> {
        let name = id.trim_end_matches(|c: char| c.is_ascii_digit());
        let digits = &id[name.len()..];
        Some((name, digits.parse().ok()?))
    }

    pub fn build(&self, family: &str, n: usize, params: Option<&Value>) -> Result<BenchmarkEntry> {
        let fam = self
            .family(family)
            .ok_or_else(|| contract(format!("unknown problem family {family:?}")))?;
        let defaults = fam.default_params();
        fam.build(n, params.unwrap_or(&defaults))
    }

    pub fn by_id(&self, id: &str) -> Result<BenchmarkEntry> {
        let (name, n) = Self::parse_id(id).ok_or_else(|| contract(format!("unknown problem {id:?}")))?;
        if !self.families.contains_key(name) {
            return Err(contract(format!("unknown problem {id:?}")));
        }
        self.build(name, n, None)
    }

    /// The canonical suite, in a fixed order.
    pub fn suite(&self) -> Result<Vec<BenchmarkEntry>> {
        self.suite.iter().map(|(f, n)| self.build(f, *n, None)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merit::{u0, U0Method};
    use crate::problem::{evaluate_objectives, validate_problem};

    #[test]
    fn biquad_ground_truth_examples() {
        assert_eq!(biquad_u0(&[0.0]), 0.0);
        assert_eq!(biquad_u0(&[2.0]), 0.5);
        assert_eq!(biquad_r(&[2.0]), Some(4.0));
    }

    #[test]
    fn every_suite_entry_validates() {
        for e in BenchmarkRegistry::builtin().suite().unwrap() {
            let r = validate_problem(&e.spec, 200, 11);
            assert!(r.is_ok(), "{}: {:?}", e.id, r.failures);
            assert!(e.spec.in_domain(&e.canonical.x0), "{}", e.id);
        }
    }

    #[test]
    fn closed_forms_match_the_grid() {
        for e in [biquad(1).unwrap(), l1quad(1, 0.3).unwrap(), l1quad_ridge(1, 0.3, 0.5).unwrap(), box_linear_pl(2).unwrap()] {
            for x in [-2.0, -0.7, -0.1, 0.0, 0.35, 1.0, 1.9] {
                let xv = vec![x; e.n];
                let exact = u0(&e.spec, &xv, Some(U0Method::ClosedForm), 0).unwrap();
                let grid = u0(&e.spec, &xv, Some(U0Method::GridBruteForce), 40_000).unwrap();
                let (a, b) = (exact.u0.unwrap(), grid.u0.unwrap());
                assert!(b <= a + exact.u0_certified_gap + 1e-12, "{} at {x}: grid {b} above {a}", e.id);
                assert!(a <= b + grid.u0_certified_gap, "{} at {x}: {a} vs {b}", e.id);
            }
        }
    }

    #[test]
    fn lam_zero_matches_biquad() {
        let (p, q) = (l1quad(2, 0.0).unwrap(), biquad(2).unwrap());
        for x in [[0.3, -1.0], [2.0, 0.5], [-2.5, 2.5]] {
            assert!((l1ridge_u0(&x, 0.0, 0.0) - biquad_u0(&x)).abs() < 1e-14);
            let a = crate::subproblem::solve_direction(&p.spec, &x, 2.0, &Default::default()).unwrap();
            let b = crate::subproblem::solve_direction(&q.spec, &x, 2.0, &Default::default()).unwrap();
            assert!(crate::linalg::dist(&a.d, &b.d) <= 1e-10);
        }
    }

    #[test]
    fn common_minimizer_is_stationary() {
        let e = box_linear_pl_with_targets(3, vec![0.4], vec![0.4]).unwrap();
        let x = [0.4, 0.0, -1.0];
        assert_eq!(crate::merit::w(&e.spec, &x, e.spec.lipschitz()).unwrap(), 0.0);
    }

    #[test]
    fn null_space_directions_leave_f_constant() {
        let e = box_linear_pl(4).unwrap();
        let v = [0.5, -1.0, 0.0, 0.0];
        let x = [0.1, 0.2, -0.3, 0.4];
        let f0 = evaluate_objectives(&e.spec, &x).unwrap();
        for t in [0.1, 0.5, 0.9] {
            let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let f = evaluate_objectives(&e.spec, &y).unwrap();
            for i in 0..2 {
                assert!((f[i] - f0[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_family_range_and_minimum() {
        let e = noncvx_exp(2).unwrap();
        assert_eq!(evaluate_objectives(&e.spec, &[1.0, 0.0]).unwrap()[0], 0.0);
        for x in [[-3.0, 3.0], [0.0, 0.0], [2.9, -0.1]] {
            for v in evaluate_objectives(&e.spec, &x).unwrap() {
                assert!((0.0..1.0).contains(&v));
            }
        }
    }

    #[test]
    fn ids_round_trip() {
        let reg = BenchmarkRegistry::builtin();
        assert_eq!(BenchmarkRegistry::parse_id("noncvx5"), Some(("noncvx", 5)));
        assert_eq!(reg.by_id("l1ridge2").unwrap().id, "l1ridge2");
        assert!(reg.by_id("nosuch").is_err());
        assert!(reg.by_id("boxpl1").is_err());
    }
}
