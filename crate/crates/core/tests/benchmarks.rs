use mopg::merit::{u0, U0Method};
use mopg::problems::{biquad, biquad_r, box_linear_pl, l1quad, l1quad_ridge, BenchmarkRegistry};
use mopg::rates::estimate_tau;
use proptest::prelude::*;

fn sample(n: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    // The closed forms must agree with the certified concave ascent oracle.
    #[test]
    fn l1_closed_forms_agree_with_ascent(x in sample(3, -2.5, 2.5), lam in 0.0f64..0.8, ridge in 0.0f64..1.0) {
        for e in [l1quad(3, lam).unwrap(), l1quad_ridge(3, lam, ridge).unwrap()] {
            let exact = u0(&e.spec, &x, Some(U0Method::ClosedForm), 0).unwrap();
            let asc = u0(&e.spec, &x, Some(U0Method::ConcaveAscent), 0).unwrap();
            let (a, b) = (exact.u0.unwrap(), asc.u0.unwrap());
            prop_assert!((a - b).abs() <= asc.u0_certified_gap + exact.u0_certified_gap + 1e-9,
                "{}: closed form {a} vs ascent {b} (gap {})", e.id, asc.u0_certified_gap);
        }
    }

    #[test]
    fn box_closed_form_agrees_with_ascent(x in sample(4, -2.0, 2.0)) {
        let e = box_linear_pl(4).unwrap();
        let exact = u0(&e.spec, &x, Some(U0Method::ClosedForm), 0).unwrap().u0.unwrap();
        let asc = u0(&e.spec, &x, Some(U0Method::ConcaveAscent), 0).unwrap();
        prop_assert!((exact - asc.u0.unwrap()).abs() <= asc.u0_certified_gap + 1e-9,
            "closed form {exact} vs ascent {:?} (gap {})", asc.u0, asc.u0_certified_gap);
    }

    #[test]
    fn biquad_u0_vanishes_exactly_on_the_segment(s in -1.0f64..1.0) {
        let e = biquad(2).unwrap();
        let v = u0(&e.spec, &[s, 0.0], None, 0).unwrap();
        prop_assert_eq!(v.u0, Some(0.0));
    }
}

#[test]
fn biquad_r_from_level_set() {
    assert_eq!(biquad_r(&[2.0]), Some(4.0));
    assert_eq!(biquad_r(&[1.5]), Some(1.0));
    // A Pareto optimal x0 has a level set containing only itself.
    assert_eq!(biquad_r(&[0.5]), Some(0.0));
    assert_eq!(biquad_r(&[0.0, 0.0]), Some(0.0));
}

#[test]
fn estimated_tau_is_positive_on_pl_families() {
    for e in [box_linear_pl(2).unwrap(), box_linear_pl(5).unwrap(), l1quad(2, 0.3).unwrap()] {
        let est = estimate_tau(&e.spec, &[], 300, 9).unwrap();
        assert!(est.tau_hat > 0.0, "{}: {}", e.id, est.tau_hat);
    }
    let est = estimate_tau(&l1quad(2, 0.3).unwrap().spec, &[], 300, 9).unwrap();
    assert!(est.tau_hat >= 1.0 - 1e-6);
}

#[test]
fn suite_ids_are_unique() {
    let suite = BenchmarkRegistry::builtin().suite().unwrap();
    let mut ids: Vec<_> = suite.iter().map(|e| e.id.clone()).collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), suite.len());
}
