use conetrace::series::DEFAULT_TRUNCATION;
use conetrace::{CrossSection, FuchsOperator, ModePolynomial, RadialSeries, SignConvention};
use num_complex::Complex64;
use proptest::prelude::*;

const T: usize = DEFAULT_TRUNCATION;

fn mode_poly() -> impl Strategy<Value = ModePolynomial> {
    prop::collection::vec(-2.0f64..2.0, 1..=3).prop_map(|c| ModePolynomial::from_real(&c))
}

fn series() -> impl Strategy<Value = RadialSeries> {
    prop::collection::vec(mode_poly(), 1..=4).prop_map(|c| RadialSeries::new(c, T).unwrap())
}

fn operator(max_order: usize) -> impl Strategy<Value = FuchsOperator> {
    (0..=max_order)
        .prop_flat_map(|m| prop::collection::vec(series(), m + 1))
        .prop_filter_map("leading coefficient vanishes", |coeffs| FuchsOperator::new(coeffs, "random").ok())
}

fn series_distance(a: &FuchsOperator, b: &FuchsOperator, mus: &[f64]) -> f64 {
    assert_eq!(a.order(), b.order());
    let mut worst = 0.0f64;
    for (sa, sb) in a.coeffs().iter().zip(b.coeffs()) {
        for p in 0..=T {
            for &mu in mus {
                let (x, y) = (sa.coeff(p).eval(mu), sb.coeff(p).eval(mu));
                worst = worst.max((x - y).norm() / x.norm().max(y.norm()).max(1.0));
            }
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conormal_of_composition_factorises(a1 in operator(3), a2 in operator(3), mu in 0.0f64..50.0) {
        let c = FuchsOperator::compose(&a2, &a1).unwrap();
        let m1 = a1.order() as f64;
        let expected = a2.conormal(mu).poly.shift(Complex64::new(m1, 0.0)).mul(&a1.conormal(mu).poly);
        let got = c.conormal(mu).poly;
        let scale = expected.norm_inf().max(1.0);
        for k in 0..=c.order() {
            prop_assert!((got.coeff(k) - expected.coeff(k)).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn composition_is_associative(a in operator(2), b in operator(2), c in operator(2)) {
        let left = FuchsOperator::compose(&FuchsOperator::compose(&a, &b).unwrap(), &c).unwrap();
        let right = FuchsOperator::compose(&a, &FuchsOperator::compose(&b, &c).unwrap()).unwrap();
        prop_assert!(series_distance(&left, &right, &[0.0, 1.0, 4.5]) < 1e-10);
    }

    #[test]
    fn mellin_symbol_at_tip_is_conormal(a in operator(3), mu in 0.0f64..20.0, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let z = Complex64::new(re, im);
        let lhs = a.mellin_symbol().eval(0.0, z, mu);
        let rhs = a.conormal(mu).eval(z);
        prop_assert!((lhs - rhs).norm() <= 1e-13 * rhs.norm().max(1.0));
    }

    #[test]
    fn conormal_is_additive(a in operator(2), b in operator(2), mu in 0.0f64..20.0) {
        prop_assume!(a.order() == b.order());
        let s = a.add(&b).unwrap();
        let expected = a.conormal(mu).poly.add(&b.conormal(mu).poly);
        let got = s.conormal(mu).poly;
        for k in 0..=s.order() {
            prop_assert!((got.coeff(k) - expected.coeff(k)).norm() < 1e-13 * expected.norm_inf().max(1.0));
        }
    }

    #[test]
    fn b_principal_symbol_is_homogeneous(
        g in prop::collection::vec(-0.5f64..0.5, 0..4),
        g0 in 0.5f64..2.0,
        c in 0.3f64..3.0,
        geometer in any::<bool>(),
        r in 0.0f64..0.4,
        rho in -3.0f64..3.0,
        s in -3.0f64..3.0,
    ) {
        let mut profile = vec![g0];
        profile.extend(g);
        let sign = if geometer { SignConvention::Geometer } else { SignConvention::Analyst };
        let cs = CrossSection::circle(c).unwrap();
        let a = FuchsOperator::cone_laplacian(&cs, &RadialSeries::scalar(&profile, T).unwrap(), sign, 1.0).unwrap();
        let base = a.principal_symbol_b(r, rho, s).unwrap();
        for tau in [2.0, 10.0] {
            let scaled = a.principal_symbol_b(r, tau * rho, tau * s).unwrap();
            prop_assert!((scaled - base * tau * tau).norm() <= 1e-12 * (tau * tau) * base.norm().max(1e-12));
        }
    }

    #[test]
    fn json_round_trip(a in operator(3)) {
        let back = FuchsOperator::from_json(&a.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.coeffs(), a.coeffs());
        prop_assert_eq!(back.order(), a.order());
    }
}

#[test]
fn euler_powers_match_falling_products() {
    let e = FuchsOperator::euler(T);
    let mut p = FuchsOperator::identity(T);
    for k in 1..=4 {
        p = FuchsOperator::compose(&e, &p).unwrap();
        // conormal(E^k)(z) = z (z + 1) ... (z + k - 1)
        for z in [-1.5, 0.0, 0.7, 3.0] {
            let expected: f64 = (0..k).map(|i| z + i as f64).product();
            assert!((p.conormal(0.0).eval(Complex64::new(z, 0.0)).re - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn composition_truncation_is_flagged() {
    let r = RadialSeries::scalar(&[1.0, 1.0], 2).unwrap();
    let a = FuchsOperator::new(vec![r], "1 + r").unwrap();
    let mut p = a.clone();
    for _ in 0..3 {
        p = FuchsOperator::compose(&a, &p).unwrap();
    }
    assert!(p.truncated);
}
