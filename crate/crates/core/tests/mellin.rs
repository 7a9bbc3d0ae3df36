use conetrace::mellin::{
    apply_operator_mellin, direct_apply, mellin_transform, op_mellin_apply, Bump, ContourSettings, LogGrid,
    RadialFunction,
};
use conetrace::{FuchsOperator, RadialSeries};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> LogGrid {
    LogGrid::new(0.1, 100.0, 2048).unwrap()
}

fn bump() -> impl Strategy<Value = Bump> {
    (0.4f64..1.6, 1.6f64..2.2).prop_map(|(center, half_width)| Bump { center, half_width })
}

fn operator() -> impl Strategy<Value = FuchsOperator> {
    (prop::collection::vec(-1.0f64..1.0, 2), prop::collection::vec(-1.0f64..1.0, 2), 0.5f64..1.5).prop_map(
        |(a0, a1, a2)| {
            FuchsOperator::new(
                vec![
                    RadialSeries::scalar(&a0, 16).unwrap(),
                    RadialSeries::scalar(&a1, 16).unwrap(),
                    RadialSeries::scalar(&[a2, 0.1], 16).unwrap(),
                ],
                "variable",
            )
            .unwrap()
        },
    )
}

fn relative_gap(a: &RadialFunction, b: &RadialFunction) -> f64 {
    a.max_abs_diff(b) / a.sup_norm().max(b.sup_norm()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn weight_line_does_not_matter_for_differential_symbols(a in operator(), b in bump()) {
        let u = b.radial(grid());
        let s = ContourSettings::default();
        let base = apply_operator_mellin(&a, 0.0, &u, 0.0, &s).unwrap();
        for beta in [-1.0, 1.0] {
            let other = apply_operator_mellin(&a, 0.0, &u, beta, &s).unwrap();
            prop_assert!(other.max_abs_diff(&base) <= 2e-5, "beta = {beta}: {}", other.max_abs_diff(&base));
        }
    }

    #[test]
    fn quantization_matches_direct_action(a in operator(), b in bump()) {
        let u = b.radial(grid());
        let via_mellin = apply_operator_mellin(&a, 0.0, &u, 0.0, &ContourSettings::default()).unwrap();
        let direct = direct_apply(&a, 0.0, &u);
        prop_assert!(via_mellin.max_abs_diff(&direct) <= 1e-5, "{}", via_mellin.max_abs_diff(&direct));
    }

    #[test]
    fn linear_in_the_input(a in operator(), b1 in bump(), b2 in bump(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let g = grid();
        let s = ContourSettings { fixed_cutoff: Some(64.0), ..ContourSettings::default() };
        let (u1, u2) = (b1.radial(g), b2.radial(g));
        let combo = RadialFunction::from_real_fn(g, |r| x * b1.value(r.ln()) + y * b2.value(r.ln()));
        let lhs = apply_operator_mellin(&a, 0.0, &combo, 0.0, &s).unwrap();
        let (o1, o2) = (
            apply_operator_mellin(&a, 0.0, &u1, 0.0, &s).unwrap(),
            apply_operator_mellin(&a, 0.0, &u2, 0.0, &s).unwrap(),
        );
        let nodes = g.nodes();
        let rhs = RadialFunction::new(g, (0..nodes.len()).map(|i| o1.values[i] * x + o2.values[i] * y).collect()).unwrap();
        prop_assert!(relative_gap(&lhs, &rhs) <= 1e-10, "{}", relative_gap(&lhs, &rhs));
    }
}

#[test]
fn linear_in_the_symbol() {
    let g = grid();
    let b = Bump { center: 0.8, half_width: 2.0 };
    let u = b.radial(g);
    let s = ContourSettings { fixed_cutoff: Some(64.0), ..ContourSettings::default() };
    let p = FuchsOperator::new(vec![RadialSeries::scalar(&[1.0, 0.2], 16).unwrap(), RadialSeries::scalar(&[0.5], 16).unwrap()], "p").unwrap();
    let q = FuchsOperator::new(vec![RadialSeries::scalar(&[-0.3], 16).unwrap(), RadialSeries::scalar(&[1.0, -0.4], 16).unwrap()], "q").unwrap();
    let sum = p.add(&q).unwrap();
    let lhs = apply_operator_mellin(&sum, 0.0, &u, 0.0, &s).unwrap();
    let (op, oq) = (apply_operator_mellin(&p, 0.0, &u, 0.0, &s).unwrap(), apply_operator_mellin(&q, 0.0, &u, 0.0, &s).unwrap());
    let rhs = RadialFunction::new(g, op.values.iter().zip(&oq.values).map(|(a, b)| a + b).collect()).unwrap();
    assert!(relative_gap(&lhs, &rhs) <= 1e-10);
}

#[test]
fn mellin_of_power_times_bump_shifts_the_argument() {
    // M(r^a u)(z) = M(u)(z + a)
    let g = LogGrid::new(1e-3, 1e2, 4096).unwrap();
    let b = Bump::on_interval(0.2, 5.0);
    let u = b.radial(g);
    let v = RadialFunction::from_real_fn(g, |r| r * r * b.value(r.ln()));
    for z in [Complex64::new(0.5, 0.0), Complex64::new(-1.0, 2.0), Complex64::new(1.0, -3.0)] {
        let lhs = mellin_transform(&v, z).value;
        let rhs = mellin_transform(&u, z + 2.0).value;
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }
}

#[test]
fn euler_operator_in_log_variable() {
    let g = grid();
    let b = Bump { center: 1.0, half_width: 1.8 };
    let u = b.radial(g);
    let euler = FuchsOperator::euler(16);
    let out = op_mellin_apply(&euler.mellin_symbol(), 0.0, 0, &u, -0.5, &ContourSettings::default()).unwrap();
    let expected = RadialFunction::from_real_fn(g, |r| -b.derivatives(r.ln(), 1)[1]);
    assert!(out.max_abs_diff(&expected) < 1e-6);
}
