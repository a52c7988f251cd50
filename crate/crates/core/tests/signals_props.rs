use avgtrack::matrix::Matrix;
use avgtrack::signals::{
    default_quad_steps, eval_input, reference_trajectory, InputDescriptor, LinearPlant,
    ReferenceSet,
};
use proptest::prelude::*;

fn plant(a: [f64; 4], b: [f64; 2]) -> LinearPlant<f64> {
    LinearPlant::new(
        Matrix::from_vec(2, 2, a.to_vec()).unwrap(),
        Matrix::from_vec(2, 1, b.to_vec()).unwrap(),
    )
    .unwrap()
}

fn coeffs<const N: usize>() -> impl Strategy<Value = [f64; N]> {
    proptest::array::uniform(-1.0f64..1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_is_linear_in_initial_state_and_input(
        a in coeffs::<4>(), b in coeffs::<2>(),
        r1 in coeffs::<2>(), r2 in coeffs::<2>(),
        amp1 in -2.0f64..2.0, amp2 in -2.0f64..2.0,
        s in -2.0f64..2.0, t in 0.0f64..2.0,
    ) {
        let p = plant(a, b);
        let sin = |amp: f64| InputDescriptor::sinusoid(vec![amp], 1.3, 0.2);
        let combined: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x + s * y).collect();
        let rs = ReferenceSet::new(
            p,
            vec![r1.to_vec(), r2.to_vec(), combined],
            vec![sin(amp1), sin(amp2), sin(amp1 + s * amp2)],
        )
        .unwrap();
        let q = 400;
        let x1 = reference_trajectory(&rs, 0, t, q).unwrap();
        let x2 = reference_trajectory(&rs, 1, t, q).unwrap();
        let x3 = reference_trajectory(&rs, 2, t, q).unwrap();
        for c in 0..2 {
            prop_assert!((x3[c] - (x1[c] + s * x2[c])).abs() <= 1e-10 * (1.0 + x3[c].abs()));
        }
    }

    #[test]
    fn trajectory_at_zero_is_initial_state(a in coeffs::<4>(), b in coeffs::<2>(), r in coeffs::<2>()) {
        let rs = ReferenceSet::new(plant(a, b), vec![r.to_vec()], vec![InputDescriptor::Constant { value: vec![1.0] }]).unwrap();
        let x = reference_trajectory(&rs, 0, 0.0, 10).unwrap();
        prop_assert!((x[0] - r[0]).abs() < 1e-15 && (x[1] - r[1]).abs() < 1e-15);
    }

    #[test]
    fn sinusoid_respects_bound(amp in proptest::collection::vec(-3.0f64..3.0, 1..4), omega in 0.0f64..5.0, phase in -3.0f64..3.0, t in 0.0f64..50.0) {
        let d = InputDescriptor::sinusoid(amp, omega, phase);
        let v = eval_input(&d, t).value;
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(n <= d.bound() + 1e-12);
    }

    #[test]
    fn table_interpolates_between_knots(
        v0 in -5.0f64..5.0, v1 in -5.0f64..5.0, t1 in 0.1f64..3.0, frac in 0.0f64..1.0,
    ) {
        let d = InputDescriptor::Table { times: vec![0.0, t1], values: vec![vec![v0], vec![v1]] };
        let s = eval_input(&d, frac * t1);
        prop_assert!(!s.held);
        prop_assert!((s.value[0] - (v0 + frac * (v1 - v0))).abs() <= 1e-12 * (1.0 + v0.abs() + v1.abs()));
        let beyond = eval_input(&d, t1 + 1.0);
        prop_assert!(beyond.held);
        prop_assert_eq!(beyond.value[0], v1);
    }
}

#[test]
fn zero_input_stable_plant_decays() {
    let rs = ReferenceSet::new(
        plant([-1.0, 0.0, 0.0, -2.0], [1.0, 0.0]),
        vec![vec![3.0, -4.0]],
        vec![InputDescriptor::Zero { dim: 1 }],
    )
    .unwrap();
    let x = reference_trajectory(&rs, 0, 30.0, 100).unwrap();
    assert!(x.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn constant_input_matches_closed_form() {
    // x' = -x + 1 from 0: x = 1 - e^{-t}
    let rs = ReferenceSet::new(
        LinearPlant::new(
            Matrix::from_rows(&[[-1.0]]).unwrap(),
            Matrix::from_rows(&[[1.0]]).unwrap(),
        )
        .unwrap(),
        vec![vec![0.0]],
        vec![InputDescriptor::Constant { value: vec![1.0] }],
    )
    .unwrap();
    let x = reference_trajectory(&rs, 0, 2.0, default_quad_steps(2.0)).unwrap();
    assert!((x[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
}
