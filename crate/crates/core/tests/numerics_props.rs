use avgtrack::matrix::Matrix;
use avgtrack::numerics::{
    invert, is_hurwitz, is_stabilizable, lyapunov_residual, matrix_exp, singular_values, solve_are,
    solve_lyapunov, sym_eig, NumericsConfig,
};
use avgtrack::sim::{integrate, FnField, SimConfig};
use proptest::prelude::*;

fn cfg() -> NumericsConfig {
    NumericsConfig::default()
}

fn square(max_n: usize, scale: f64) -> impl Strategy<Value = Matrix<f64>> {
    (1..=max_n).prop_flat_map(move |n| {
        proptest::collection::vec(-scale..scale, n * n)
            .prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
    })
}

fn sized(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = Matrix<f64>> {
    proptest::collection::vec(-scale..scale, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

/// `(A, B, Q)` with `Q = RᵀR + 0.1 I`.
fn are_instance() -> impl Strategy<Value = (Matrix<f64>, Matrix<f64>, Matrix<f64>)> {
    (1..=5usize)
        .prop_flat_map(|n| (Just(n), 1..=n))
        .prop_flat_map(|(n, m)| (sized(n, n, 1.0), sized(n, m, 1.0), sized(n, n, 1.0)))
        .prop_map(|(a, b, r)| {
            let n = a.rows();
            let q = &(&r.transpose() * &r) + &Matrix::identity(n).scale(0.1);
            (a, b, q)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_of_sum_for_commuting_times(a in square(5, 2.0), s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let lhs = matrix_exp(&a, s + t).unwrap();
        let rhs = &matrix_exp(&a, s).unwrap() * &matrix_exp(&a, t).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn exp_inverse(a in square(5, 2.0), t in 0.0f64..1.5) {
        let prod = &matrix_exp(&a, t).unwrap() * &matrix_exp(&a, -t).unwrap();
        prop_assert!((&prod - &Matrix::identity(a.rows())).max_abs() <= 1e-9);
    }

    #[test]
    fn exp_matches_rk4(a in square(4, 1.5), y0 in proptest::collection::vec(-2.0f64..2.0, 4)) {
        let n = a.rows();
        let field = FnField {
            dim: n,
            f: |_t: f64, y: &[f64], dy: &mut [f64]| dy.copy_from_slice(&a.mul_vec(y)),
        };
        let sim = SimConfig { t_end: 1.0, dt: 1e-3, record_every: 1000, stiffness_target: None, ..SimConfig::default() };
        let out = integrate(&field, &y0[..n], &sim).unwrap();
        let exact = matrix_exp(&a, 1.0).unwrap().mul_vec(&y0[..n]);
        let got = out.states.last().unwrap();
        for (g, e) in got.iter().zip(&exact) {
            prop_assert!((g - e).abs() <= 1e-9 * e.abs().max(1.0));
        }
    }

    #[test]
    fn sym_eig_reconstructs(m in square(6, 3.0)) {
        let s = m.symmetrize();
        let e = sym_eig(&s, &cfg()).unwrap();
        let v = &e.vectors;
        let back = &(v * &Matrix::diag(&e.values)) * &v.transpose();
        prop_assert!((&back - &s).max_abs() <= 1e-10 * s.max_abs().max(1.0));
        prop_assert!((&(&v.transpose() * v) - &Matrix::identity(s.rows())).max_abs() <= 1e-10);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn singular_values_match_gram_eigenvalues(m in square(5, 2.0)) {
        let sv = singular_values(&m, &cfg());
        let mut gram = sym_eig(&(&m.transpose() * &m), &cfg()).unwrap().values;
        gram.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (s, g) in sv.iter().zip(&gram) {
            prop_assert!((s * s - g.max(0.0)).abs() <= 1e-9 * gram[0].max(1.0));
        }
    }

    #[test]
    fn inverse_round_trip(m in square(5, 2.0)) {
        let n = m.rows();
        let shifted = &m + &Matrix::identity(n).scale(5.0 * n as f64);
        let inv = invert(&shifted, 1e-14).unwrap();
        prop_assert!((&(&shifted * &inv) - &Matrix::identity(n)).max_abs() <= 1e-12);
    }

    #[test]
    fn lyapunov_for_hurwitz(m in square(5, 1.0), r in square(5, 1.0)) {
        let n = m.rows().min(r.rows());
        let m = Matrix::from_fn(n, n, |i, j| m[(i, j)]);
        let r = Matrix::from_fn(n, n, |i, j| r[(i, j)]);
        let f = &m - &Matrix::identity(n).scale(m.frobenius_norm() + 0.5);
        let q = &(&r.transpose() * &r) + &Matrix::identity(n);
        let x = solve_lyapunov(&f, &q, &cfg()).unwrap();
        prop_assert!(lyapunov_residual(&f, &x, &q) <= 1e-10);
        prop_assert!(sym_eig(&x, &cfg()).unwrap().min() > 0.0);
    }

    #[test]
    fn are_solution_is_stabilizing((a, b, q) in are_instance()) {
        prop_assume!(is_stabilizable(&a, &b, &cfg()).unwrap());
        let relaxed = NumericsConfig { are_residual_tol: f64::INFINITY, ..cfg() };
        let sol = solve_are(&a, &b, &q, &relaxed).unwrap();
        let p_norm = sol.p.frobenius_norm();
        // rounding P to working precision bounds what the residual can reach
        let scale = 1.0 + q.frobenius_norm() + 2.0 * p_norm * a.frobenius_norm() + (p_norm * b.frobenius_norm()).powi(2);
        prop_assert!(sol.residual_norm <= 1e-13 * scale, "residual {} scale {}", sol.residual_norm, scale);
        prop_assert!(sol.p.is_symmetric(1e-12 * p_norm.max(1.0)));
        prop_assert!(sym_eig(&sol.p, &cfg()).unwrap().min() > 0.0);
        let closed = &a + &(&b * &sol.gain(&b));
        prop_assert!(is_hurwitz(&closed, &cfg()).unwrap());
    }
}

#[test]
fn single_precision_solves() {
    let a = Matrix::<f32>::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap();
    let b = Matrix::<f32>::from_rows(&[[0.0], [1.0]]).unwrap();
    let cfg = NumericsConfig::single_precision();
    let sol = solve_are(&a, &b, &Matrix::identity(2), &cfg).unwrap();
    let k = sol.gain(&b);
    assert!((k[(0, 0)] + 0.41421).abs() < 1e-4);
    assert!((k[(0, 1)] + 0.41421).abs() < 1e-4);
}
