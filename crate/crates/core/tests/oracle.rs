use std::f64::consts::PI;

use conetrace::oracle::{
    dunford_heat_trace, eigenvalues_exact_cone, eigenvalues_fd, heat_trace_sum, read_heat_trace_csv,
    write_heat_trace_csv, Contour, EigenvalueList, ModelCone,
};
use conetrace::CrossSection;
use proptest::prelude::*;

fn disk(c: f64) -> ModelCone {
    ModelCone::flat(CrossSection::circle(c).unwrap())
}

#[test]
fn exact_and_fd_spectra_agree() {
    for c in [0.5, 1.0, 1.5] {
        let exact = eigenvalues_exact_cone(&disk(c), 200.0).unwrap().expanded(10);
        let fd: Vec<_> = eigenvalues_fd(&disk(c), 2048, 40)
            .unwrap()
            .into_iter()
            .flat_map(|f| std::iter::repeat_n(f, f.multiplicity))
            .take(10)
            .collect();
        assert_eq!(fd.len(), 10);
        for (e, f) in exact.iter().zip(&fd) {
            assert!((e - f.value).abs() <= f.error_estimate, "c = {c}: {e} vs {f:?}");
        }
    }
}

#[test]
fn counting_function_follows_weyl() {
    for c in [1.0, 1.5] {
        let eigs = eigenvalues_exact_cone(&disk(c), 2000.0).unwrap();
        let ratio = eigs.counting(2000.0) as f64 / 2000.0 / (c / 4.0);
        assert!((ratio - 1.0).abs() < 0.05, "c = {c}: {ratio}");
    }
}

#[test]
fn counting_function_follows_two_term_weyl() {
    // N ~ (area / 4 pi) L - (perimeter / 4 pi) sqrt(L) with area pi c, perimeter 2 pi c.
    for c in [0.5, 1.0, 1.5] {
        let lambda = 2000.0;
        let eigs = eigenvalues_exact_cone(&disk(c), lambda).unwrap();
        let predicted = c / 4.0 * lambda - c / 2.0 * lambda.sqrt();
        let ratio = eigs.counting(lambda) as f64 / predicted;
        assert!((ratio - 1.0).abs() < 0.02, "c = {c}: {ratio}");
    }
}

#[test]
fn dunford_matches_sum_within_error_bounds() {
    let eigs = eigenvalues_exact_cone(&disk(1.0), 4000.0).unwrap();
    for t in [0.05, 0.1, 0.5, 1.0] {
        let s = heat_trace_sum(&eigs, t, None).unwrap();
        for phi in [PI / 6.0, PI / 4.0, PI / 3.0] {
            for delta in [0.5, 1.0, 3.0] {
                let d = dunford_heat_trace(&eigs, &Contour { phi, delta }, t).unwrap();
                let bound = 10.0 * (d.error_estimate + s.tail_bound) + 1e-12 * s.value;
                assert!((d.value - s.value).abs() <= bound, "t = {t}, phi = {phi}, delta = {delta}: {d:?} vs {s:?}");
            }
        }
    }
}

#[test]
fn eigenvalue_list_csv_round_trip() {
    let eigs = eigenvalues_exact_cone(&disk(1.0), 300.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eigs.csv");
    eigs.write_csv(&path).unwrap();
    let back = EigenvalueList::read_csv(&path, Some(300.0)).unwrap();
    assert_eq!(back, eigs);
}

#[test]
fn heat_trace_csv_round_trip_skips_comments() {
    let eigs = eigenvalues_exact_cone(&disk(1.0), 4000.0).unwrap();
    let samples: Vec<_> = [0.05, 0.1, 0.2].iter().map(|&t| heat_trace_sum(&eigs, t, None).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    write_heat_trace_csv(&samples, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, format!("# produced elsewhere\n{text}")).unwrap();
    assert_eq!(read_heat_trace_csv(&path).unwrap(), samples);
}

#[test]
fn missing_eigenvalue_file_is_an_error() {
    assert!(EigenvalueList::read_csv(std::path::Path::new("/nonexistent/eigs.csv"), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn finite_spectrum_dunford_identity(
        eigs in prop::collection::vec((1.5f64..50.0, 1usize..4), 1..12),
        t in 0.05f64..2.0,
        phi in 0.3f64..1.2,
    ) {
        let list = EigenvalueList::finite(eigs);
        let s = heat_trace_sum(&list, t, None).unwrap();
        prop_assert_eq!(s.tail_bound, 0.0);
        let d = dunford_heat_trace(&list, &Contour { phi, delta: 1.0 }, t).unwrap();
        prop_assert!((d.value - s.value).abs() <= 1e-10 * s.value.max(1.0), "{:?} vs {:?}", d, s);
    }

    #[test]
    fn heat_trace_is_monotone_in_t(t in 0.01f64..1.0, dt in 0.001f64..0.5) {
        let list = eigenvalues_exact_cone(&disk(1.0), 3000.0).unwrap();
        let a = heat_trace_sum(&list, t, None).unwrap().value;
        let b = heat_trace_sum(&list, t + dt, None).unwrap().value;
        prop_assert!(b < a);
    }
}
