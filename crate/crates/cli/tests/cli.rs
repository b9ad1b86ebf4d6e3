use std::path::Path;
use std::process::{Command, Output};

use mopg::problem::Quadratic;
use mopg::problems::{biquad, BenchmarkEntry};
use mopg::problem::{Objective, SmoothPart, TestBox};
use mopg::ProblemSpec;
use mopg_cli::commands::{bench_entries, format_table};
use mopg_cli::problem_file::{self, ProblemFile};
use mopg_cli::results::ResultsDocument;
use std::sync::Arc;

fn mopg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mopg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_results_with_halving_u0() {
    let dir = tempfile::tempdir().unwrap();
    let o = mopg(
        dir.path(),
        &["run", "--problem", "biquad1", "--x0", "2", "--ell", "2", "--max-iters", "100", "--record-u0", "--out", "r.json", "--trace-csv", "r.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = ResultsDocument::read(&dir.path().join("r.json")).unwrap();
    assert_eq!(doc.problem_id, "biquad1");
    let u: Vec<f64> = doc.trace.records.iter().map(|r| r.u0.unwrap()).collect();
    for w in u.windows(2) {
        assert!(w[1] <= 0.5 * w[0]);
    }
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,ell,norm_d,w_ell,w1,u0,F_1,F_2,x_1");
    // w1 was not recorded: an empty field, not a zero.
    assert_eq!(lines.next().unwrap(), "0,2,0.5,0.25,,0.5,0.5,4.5,2");
}

#[test]
fn stationary_start_and_unknown_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = mopg(dir.path(), &["run", "--problem", "biquad1", "--x0", "0", "--ell", "2", "--out", "s.json"]);
    assert!(o.status.success());
    let doc = ResultsDocument::read(&dir.path().join("s.json")).unwrap();
    assert_eq!(doc.trace.iterations(), 0);
    let o = mopg(dir.path(), &["run", "--problem", "nosuch"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown problem"));
    let o = mopg(dir.path(), &["run", "--problem", "biquad1", "--ell", "0.5"]);
    assert!(!o.status.success(), "fixed l below L must be rejected");
}

#[test]
fn verify_applies_regime_guards() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mopg(d, &["run", "--problem", "biquad1", "--x0", "2", "--ell", "2", "--record-u0", "--out", "b.json"]).status.success());
    let o = mopg(d, &["verify", "--results", "b.json", "--bound", "strong"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = ResultsDocument::read(&d.join("b.json")).unwrap();
    let q = doc.reports[0].factor.unwrap();
    assert!((q - 0.70710678).abs() < 1e-8);

    assert!(mopg(d, &["run", "--problem", "noncvx2", "--record-w1", "--out", "n.json"]).status.success());
    let before = std::fs::read_to_string(d.join("n.json")).unwrap();
    let o = mopg(d, &["verify", "--results", "n.json", "--bound", "convex"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("does not apply"));
    assert_eq!(std::fs::read_to_string(d.join("n.json")).unwrap(), before);
    assert!(mopg(d, &["verify", "--results", "n.json", "--bound", "nonconvex"]).status.success());

    assert!(mopg(d, &["run", "--problem", "boxpl3", "--ell", "3", "--record-u0", "--out", "p.json"]).status.success());
    let o = mopg(d, &["verify", "--results", "p.json", "--bound", "pl", "--tau", "auto"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = ResultsDocument::read(&d.join("p.json")).unwrap();
    assert!(doc.tau_estimate.as_ref().unwrap().tau_hat > 0.0);
    assert_eq!(doc.reports[0].tau, Some(doc.tau_estimate.unwrap().tau_hat));
}

#[test]
fn plot_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mopg(d, &["run", "--problem", "biquad1", "--x0", "2", "--ell", "2", "--record-u0", "--out", "b.json"]).status.success());
    let o = mopg(d, &["plot", "--results", "b.json", "--metric", "u0", "--scale", "semilog", "--bound", "--out", "u.svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = std::fs::read_to_string(d.join("u.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<svg") && !svg.contains("href"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(mopg(d, &["plot", "--results", "b.json", "--metric", "u0", "--scale", "loglog", "--bound", "--out", "c.svg"]).status.success());

    let o = mopg(d, &["plot", "--results", "b.json", "--metric", "w1", "--out", "w.svg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--record-w1"));

    assert!(mopg(d, &["run", "--problem", "biquad1", "--x0", "0", "--ell", "2", "--record-u0", "--out", "z.json"]).status.success());
    assert!(!mopg(d, &["plot", "--results", "z.json", "--metric", "u0", "--out", "z.svg"]).status.success());
}

#[test]
fn bench_strong_suite_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = mopg(dir.path(), &["bench", "--suite", "strong", "--out-dir", "out"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.contains("strong:OK") && !r.contains("FAIL")));
    assert_eq!(std::fs::read_dir(dir.path().join("out")).unwrap().count(), 4);
}

#[test]
fn corrupted_entry_fails_its_row() {
    let good = biquad(1).unwrap();
    let q = Quadratic::isotropic(3.0, vec![1.0]).unwrap();
    // Declared Lipschitz constant 1 for a curvature-3 quadratic.
    let bad_part = SmoothPart::new(Arc::new(q), 1.0, 1.0, false).unwrap();
    let spec = ProblemSpec::new(
        "biquad1",
        vec![Objective::smooth_only(bad_part), good.spec.objectives()[1].clone()],
        TestBox::cube(1, 3.0).unwrap(),
    )
    .unwrap()
    .with_ground_truth(good.ground_truth().clone());
    let bad = BenchmarkEntry {
        spec: Arc::new(spec),
        ..good.clone()
    };
    let rows = bench_entries(&[good, bad], None, 0, None);
    assert!(rows[0].ok());
    assert!(!rows[1].ok());
    let table = format_table(&rows);
    assert!(table.lines().nth(2).unwrap().contains("FAIL"));
}

#[test]
fn equal_flags_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.json", "b.json"] {
        let o = mopg(d, &["run", "--problem", "l1quad2", "--x0", "random", "--seed", "42", "--record-u0", "--record-w1", "--out", name]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
}

#[test]
fn results_round_trip_and_reject_unknown_major() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mopg(d, &["run", "--problem", "boxpl3", "--ell", "3", "--record-u0", "--record-w1", "--out", "r.json"]).status.success());
    assert!(mopg(d, &["verify", "--results", "r.json", "--bound", "pl"]).status.success());
    let text = std::fs::read_to_string(d.join("r.json")).unwrap();
    let doc = ResultsDocument::from_json(&text).unwrap();
    assert_eq!(doc.to_json().unwrap(), text);
    let future = text.replacen("\"schema_version\": \"1.0\"", "\"schema_version\": \"2.0\"", 1);
    assert!(ResultsDocument::from_json(&future).is_err());
    let minor = text.replacen("\"schema_version\": \"1.0\"", "\"schema_version\": \"1.3\"", 1);
    assert!(ResultsDocument::from_json(&minor).is_ok());
}

#[test]
fn problem_files_export_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(mopg(d, &["export", "--problem", "l1ridge2", "--out", "p.json"]).status.success());
    let file = problem_file::read(&d.join("p.json")).unwrap();
    let entry = problem_file::load(&file).unwrap();
    assert_eq!(entry.id, "l1ridge2");
    assert!(entry.ground_truth().u0.is_some());
    let o = mopg(d, &["run", "--problem", "p.json", "--record-u0", "--out", "r.json"]);
    assert!(o.status.success(), "{}", stderr(&o));

    // Objectives that disagree with the referenced family are rejected.
    let mut wrong: ProblemFile = file.clone();
    wrong.objectives[0].nonsmooth.params = serde_json::json!({ "l1": 0.9, "l2": 0.5 });
    assert!(problem_file::load(&wrong).is_err());
}

#[test]
fn custom_problem_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = r#"{
  "format_version": "1.0",
  "id": "norm_pair",
  "dimension": 2,
  "objectives": [
    { "smooth": { "kernel": "quadratic", "params": { "hessian": [[2, 0], [0, 1]], "center": [1, 1], "offset": 0 }, "lipschitz": 2.0, "modulus": 1.0 },
      "nonsmooth": { "kind": "l2_norm", "params": { "weight": 0.2 } } },
    { "smooth": { "kernel": "quadratic", "params": { "hessian": [[1, 0], [0, 1]], "center": [-1, 0], "offset": 0 }, "lipschitz": 1.0, "modulus": 1.0 },
      "nonsmooth": { "kind": "l2_norm", "params": { "weight": 0.2 } } }
  ],
  "test_box": { "lower": [-3, -3], "upper": [3, 3] },
  "ground_truth": { "f_min": 0.0 }
}"#;
    std::fs::write(d.join("custom.json"), text).unwrap();
    let o = mopg(d, &["run", "--problem", "custom.json", "--x0", "2,-2", "--record-u0", "--record-w1", "--out", "r.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for bound in ["nonconvex", "strong", "pl"] {
        let o = mopg(d, &["verify", "--results", "r.json", "--bound", bound]);
        assert!(o.status.success(), "{bound}: {}", stderr(&o));
    }
    // No R is known for a custom problem.
    assert!(!mopg(d, &["verify", "--results", "r.json", "--bound", "convex"]).status.success());

    let bad = text.replace("\"lipschitz\": 2.0", "\"lipschitz\": 0.5");
    std::fs::write(d.join("bad.json"), bad).unwrap();
    let o = mopg(d, &["run", "--problem", "bad.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("validation"));
}
