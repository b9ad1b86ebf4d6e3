use mopg::linalg::{dot, norm_sq};
use mopg::problem::soft_threshold;
use mopg::problems::l1quad;
use mopg::subproblem::{solve_direction, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_objective_direction_is_the_prox_step(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        lam in 0.0f64..1.0,
        ell_scale in 1.01f64..5.0,
        which in 0usize..2,
    ) {
        let e = l1quad(3, lam).unwrap();
        let p = e.spec.objective_slice(&[which], "slice").unwrap();
        let ell = ell_scale * p.lipschitz();
        let grad = &p.gradients(&x)[0];
        let y: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| soft_threshold(xi - gi / ell, lam / ell)).collect();
        let dir = solve_direction(&p, &x, ell, &SolverConfig::default()).unwrap();
        for j in 0..3 {
            prop_assert!((dir.d[j] - (y[j] - x[j])).abs() <= 1e-12);
        }
        let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g = |v: &[f64]| lam * v.iter().map(|t| t.abs()).sum::<f64>();
        let big_d = -2.0 * ell * (dot(grad, &d) + 0.5 * ell * norm_sq(&d) + g(&y) - g(&x));
        prop_assert!((dir.w_ell - big_d / (2.0 * ell)).abs() <= 1e-10);
    }
}
