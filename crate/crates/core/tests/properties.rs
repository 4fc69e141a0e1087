//! Property tests of the value-function invariants on random problems.

mod support;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use support::{log_points, rel, Spectrum};
use tikreg::selection::{gamma_function, psi_product};
use tikreg::{
    compute_svd, eval_f_derivatives, eval_g, gen_diagonal, solve_tikhonov, svd_value_function, ExactSource,
    ProblemInstance, Regularizer, ValueSource,
};

fn diagonal_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..1.0, n).prop_map(|e| e.into_iter().map(|v| 10f64.powf(v)).collect()),
            prop::collection::vec(0.1f64..2.0, n),
        )
    })
}

fn dense_problem() -> impl Strategy<Value = ProblemInstance> {
    (2usize..6, 0usize..3, any::<bool>()).prop_flat_map(|(n, extra, diag_b)| {
        let m = n + extra;
        (
            prop::collection::vec(-1.0f64..1.0, m * n),
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(0.2f64..3.0, n),
        )
            .prop_map(move |(k, y, b)| {
                let k = DMatrix::from_row_slice(m, n, &k) + DMatrix::identity(m, n);
                let reg = if diag_b { Regularizer::Diagonal(DVector::from_vec(b)) } else { Regularizer::Identity };
                ProblemInstance::new(k, reg, DVector::from_vec(y)).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn value_function_is_nondecreasing_and_concave(p in dense_problem()) {
        let grid = log_points(1e-4, 1e3, 60);
        let f: Vec<f64> = grid.iter().map(|&a| solve_tikhonov(&p, a).unwrap().f).collect();
        let top = *f.last().unwrap();
        for w in f.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12 * top);
        }
        for i in 1..grid.len() - 1 {
            let b = eval_f_derivatives(&p, grid[i], 2).unwrap();
            prop_assert!(b.values[2] <= 1e-12 * top / grid[i].powi(2));
        }
    }

    #[test]
    fn split_identity_holds(p in dense_problem(), e in -4.0f64..3.0) {
        let a = 10f64.powf(e);
        let b = eval_f_derivatives(&p, a, 1).unwrap();
        let s = &b.solution;
        let phi = (&p.k * &s.x - &p.y_delta).norm_squared();
        let psi = p.b.quadratic_form(&s.x);
        prop_assert!(rel(b.values[1], psi) <= 1e-10);
        prop_assert!((b.values[0] - a * b.values[1] - phi).abs() <= 1e-10 * b.values[0]);
    }

    #[test]
    fn svd_route_matches_direct_solve((sig, c) in diagonal_problem(), e in -6.0f64..2.0) {
        let p = gen_diagonal(&sig, &c).unwrap();
        let a = 10f64.powf(e);
        let (f, fp) = svd_value_function(&compute_svd(&p).unwrap(), a).unwrap();
        let s = solve_tikhonov(&p, a).unwrap();
        prop_assert!(rel(f, s.f) <= 1e-10);
        prop_assert!(rel(fp, s.psi) <= 1e-10);
        let oracle = Spectrum::diagonal(&sig, &c);
        prop_assert!(rel(f, oracle.value(a)) <= 1e-12);
    }

    #[test]
    fn dense_svd_route_matches_direct_solve(p in dense_problem(), e in -3.0f64..2.0) {
        prop_assume!(p.b.is_identity());
        let a = 10f64.powf(e);
        let (f, fp) = svd_value_function(&compute_svd(&p).unwrap(), a).unwrap();
        let s = solve_tikhonov(&p, a).unwrap();
        prop_assert!(rel(f, s.f) <= 1e-9);
        prop_assert!(rel(fp, s.psi) <= 1e-9);
    }

    #[test]
    fn gamma_dominates_product((sig, c) in diagonal_problem(), e in -6.0f64..2.0, gamma in 0.2f64..4.0) {
        let p = gen_diagonal(&sig, &c).unwrap();
        let a = 10f64.powf(e);
        let v = ExactSource::new(&p).unwrap().eval(a, 1).unwrap();
        let gm = gamma_function(a, v[0], gamma).unwrap();
        let ps = psi_product(a, &v, gamma).unwrap();
        prop_assert!(gm >= ps - 1e-12 * gm);
    }

    #[test]
    fn g_derivative_is_residual(p in dense_problem(), e in -2.0f64..3.0) {
        // G(γ) = γF(1/γ) has G'(γ) = φ(x_{1/γ}).
        let gamma = 10f64.powf(e);
        let h = 1e-5 * gamma;
        let fd = (eval_g(&p, gamma + h).unwrap() - eval_g(&p, gamma - h).unwrap()) / (2.0 * h);
        let phi = solve_tikhonov(&p, 1.0 / gamma).unwrap().phi;
        prop_assert!((fd - phi).abs() <= 1e-5 * phi.max(1e-8 * p.data_norm_sq()));
    }
}
