//! Declarative JSON problem files.
//!
//! ```json
//! {
//!   "format_version": "1.0",
//!   "id": "lasso_pair",
//!   "dimension": 2,
//!   "objectives": [
//!     { "smooth": { "kernel": "quadratic",
//!                   "params": { "hessian": [[1, 0], [0, 1]], "center": [1, 0], "offset": 0 },
//!                   "lipschitz": 1.0, "modulus": 1.0 },
//!       "nonsmooth": { "kind": "l1", "params": { "weight": 0.3 } } }
//!   ],
//!   "test_box": { "lower": [-3, -3], "upper": [3, 3] },
//!   "ground_truth": { "f_min": 0.0 }
//! }
//! ```
//!
//! A `benchmark` block (`{"family": "l1quad", "n": 2, "params": {...}}`) attaches the
//! family's analytic ground truth; the objectives must then agree with the family.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use mopg::algorithm::RunConfig;
use mopg::merit::tau_strongly_convex;
use mopg::problem::{
    evaluate_objectives, validate_problem, GroundTruth, NonsmoothRegistry, Objective, SmoothKernelRegistry,
    SmoothPart, TestBox,
};
use mopg::problems::{BenchmarkEntry, BenchmarkRegistry, CanonicalRun, Regime, Theorem};
use mopg::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const FORMAT_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub format_version: String,
    pub id: String,
    pub dimension: usize,
    pub objectives: Vec<ObjectiveDecl>,
    pub test_box: TestBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthDecl>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveDecl {
    pub smooth: SmoothDecl,
    #[serde(default)]
    pub nonsmooth: NonsmoothDecl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothDecl {
    pub kernel: String,
    pub params: Value,
    pub lipschitz: f64,
    #[serde(default)]
    pub modulus: f64,
    #[serde(default)]
    pub nonconvex: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonsmoothDecl {
    pub kind: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    json!({})
}

impl Default for NonsmoothDecl {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            params: empty_object(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRef {
    pub family: String,
    pub n: usize,
    #[serde(default = "empty_object")]
    pub params: Value,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDecl {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto_set: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

/// Declarative form of a benchmark entry.
pub fn export(entry: &BenchmarkEntry) -> ProblemFile {
    let p = &entry.spec;
    let objectives = p
        .objectives()
        .iter()
        .map(|o| {
            let (kind, params) = o.nonsmooth.describe();
            let f = o.smooth.function();
            ObjectiveDecl {
                smooth: SmoothDecl {
                    kernel: f.kernel().into(),
                    params: f.params(),
                    lipschitz: o.smooth.lipschitz_bound(),
                    modulus: o.smooth.convexity_modulus(),
                    nonconvex: o.smooth.is_nonconvex(),
                },
                nonsmooth: NonsmoothDecl { kind, params },
            }
        })
        .collect();
    let gt = entry.ground_truth();
    ProblemFile {
        format_version: FORMAT_VERSION.into(),
        id: entry.id.clone(),
        dimension: p.n(),
        objectives,
        test_box: p.test_box().clone(),
        benchmark: Some(BenchmarkRef {
            family: entry.family.clone(),
            n: entry.n,
            params: entry.params.clone(),
        }),
        ground_truth: Some(GroundTruthDecl {
            regime: Some(entry.regime),
            f_min: gt.f_min,
            tau: gt.tau,
            pareto_set: gt.pareto_set.clone(),
            x0: Some(entry.canonical.x0.clone()),
        }),
    }
}

fn build_spec(file: &ProblemFile) -> Result<ProblemSpec> {
    let major = file.format_version.split('.').next().unwrap_or("");
    if major != "1" {
        bail!("unsupported problem file version {:?}", file.format_version);
    }
    let kernels = SmoothKernelRegistry::builtin();
    let kinds = NonsmoothRegistry::builtin();
    let mut objectives = Vec::with_capacity(file.objectives.len());
    for (i, o) in file.objectives.iter().enumerate() {
        let f = kernels
            .build(&o.smooth.kernel, &o.smooth.params)
            .with_context(|| format!("objective {}", i + 1))?;
        let smooth = SmoothPart::new(f, o.smooth.lipschitz, o.smooth.modulus, o.smooth.nonconvex)
            .with_context(|| format!("objective {}", i + 1))?;
        let g = kinds
            .build(&o.nonsmooth.kind, &o.nonsmooth.params)
            .with_context(|| format!("objective {}", i + 1))?;
        objectives.push(Objective::new(smooth, g));
    }
    let spec = ProblemSpec::new(file.id.clone(), objectives, file.test_box.clone())?;
    if spec.n() != file.dimension {
        bail!("declared dimension {} but objectives have dimension {}", file.dimension, spec.n());
    }
    Ok(spec)
}

fn theorems_for(regime: Regime, truth: &GroundTruth) -> Vec<Theorem> {
    let mut t = Vec::new();
    if truth.f_min.is_some() {
        t.push(Theorem::NonconvexW1);
    }
    if matches!(regime, Regime::Convex | Regime::StronglyConvex) && truth.r_constant.is_some() {
        t.push(Theorem::ConvexU0);
    }
    if regime == Regime::StronglyConvex {
        t.push(Theorem::StronglyConvexLinear);
    }
    if matches!(regime, Regime::StronglyConvex | Regime::ProximalPL) {
        t.push(Theorem::PlLinear);
    }
    t
}

/// Agreement of two specs on objective values and declared constants.
fn check_agreement(a: &ProblemSpec, b: &ProblemSpec) -> Result<()> {
    if a.n() != b.n() || a.m() != b.m() {
        bail!("benchmark block does not match objectives: shapes differ");
    }
    if a.lipschitz() != b.lipschitz() || a.mu() != b.mu() || a.nu() != b.nu() {
        bail!("benchmark block does not match objectives: constants differ");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..16 {
        let unit: Vec<f64> = (0..a.n()).map(|_| rng.gen::<f64>()).collect();
        let x = a.test_box().point_at(&unit);
        let (fa, fb) = (evaluate_objectives(a, &x)?, evaluate_objectives(b, &x)?);
        for (u, v) in fa.iter().zip(&fb) {
            let same = u == v || (u - v).abs() <= 1e-12 * (1.0 + u.abs());
            if !same {
                bail!("benchmark block does not match objectives at {x:?}: {u} vs {v}");
            }
        }
    }
    Ok(())
}

/// Builds the entry a problem file describes and validates it.
pub fn load(file: &ProblemFile) -> Result<BenchmarkEntry> {
    let spec = build_spec(file)?;
    let report = validate_problem(&spec, 200, 0);
    if !report.is_ok() {
        let f = &report.failures[0];
        bail!("problem {} failed validation ({:?}): {}", file.id, f.check, f.detail);
    }
    let decl = file.ground_truth.clone().unwrap_or_default();
    if let Some(b) = &file.benchmark {
        let mut entry = BenchmarkRegistry::builtin().build(&b.family, b.n, Some(&b.params))?;
        check_agreement(&spec, &entry.spec)?;
        if let Some(x0) = decl.x0 {
            entry.canonical.x0 = x0;
        }
        return Ok(entry);
    }
    let regime = decl.regime.unwrap_or(if !spec.is_convex() {
        Regime::NonconvexBoundedBelow
    } else if spec.mu() > 0.0 {
        Regime::StronglyConvex
    } else {
        Regime::Convex
    });
    let tau = decl.tau.or_else(|| {
        (regime == Regime::StronglyConvex)
            .then(|| tau_strongly_convex(&spec).ok())
            .flatten()
    });
    let truth = GroundTruth {
        pareto_set: decl.pareto_set,
        f_min: decl.f_min,
        tau,
        ..GroundTruth::default()
    };
    let theorems = theorems_for(regime, &truth);
    let tb = spec.test_box();
    let x0 = decl.x0.unwrap_or_else(|| tb.point_at(&vec![0.5; tb.dim()]));
    let config = RunConfig::fixed(2.0 * spec.lipschitz(), 200);
    let spec = spec.with_ground_truth(truth);
    Ok(BenchmarkEntry {
        id: file.id.clone(),
        family: "file".into(),
        n: spec.n(),
        params: json!({}),
        spec: Arc::new(spec),
        regime,
        theorems,
        canonical: CanonicalRun { x0, config },
    })
}

pub fn read(path: &Path) -> Result<ProblemFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing problem file {}", path.display()))
}

/// A benchmark id such as `biquad1`, or the path of a problem file.
pub fn resolve(arg: &str) -> Result<(BenchmarkEntry, ProblemFile)> {
    let path = Path::new(arg);
    if path.is_file() || arg.ends_with(".json") {
        let file = read(path)?;
        let entry = load(&file)?;
        return Ok((entry, file));
    }
    let entry = BenchmarkRegistry::builtin()
        .by_id(arg)
        .map_err(|_| anyhow!("unknown problem {arg:?}"))?;
    let file = export(&entry);
    Ok((entry, file))
}
