//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use conetrace::expansion::{
    cutoff_moment, fit_heat_trace, geometric_grid, residual_order, twisted_homogeneity_residual, CutoffFunction,
    ExpansionBasis, Weighting,
};
use conetrace::mellin::{apply_operator_mellin, Bump, ContourSettings, LogGrid, RadialFunction};
use conetrace::oracle::{
    dunford_heat_trace, eigenvalues_exact_cone, eigenvalues_fd, heat_trace_sum, Contour, HeatTraceSample, ModelCone,
};
use conetrace::spectral::boundary_spectrum;
use conetrace::weakly_parametric::{wp_coefficients, wp_remainder_order, ParamSymbol, SymbolPoint, WRay};
use conetrace::{CrossSection, FuchsOperator, ModePolynomial, RadialSeries, Sector, SignConvention};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_operator(rng: &mut StdRng, order: usize, trunc: usize) -> FuchsOperator {
    let coeffs = (0..=order)
        .map(|_| {
            let terms = rng.random_range(1..=4);
            let series = (0..terms)
                .map(|_| {
                    let deg = rng.random_range(0..=2);
                    let c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-2.0..2.0)).collect();
                    ModePolynomial::from_real(&c)
                })
                .collect();
            RadialSeries::new(series, trunc).unwrap()
        })
        .collect();
    FuchsOperator::new(coeffs, "random").unwrap()
}

fn composition_identity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m1, m2) = (rng.random_range(0..=3), rng.random_range(0..=3));
        let a1 = random_operator(&mut rng, m1, 12);
        let a2 = random_operator(&mut rng, m2, 12);
        let c = FuchsOperator::compose(&a2, &a1).unwrap();
        for j in 0..20 {
            let mu = (j * j) as f64 / 1.7;
            let expected = a2.conormal(mu).poly.shift(Complex64::new(m1 as f64, 0.0)).mul(&a1.conormal(mu).poly);
            let got = c.conormal(mu).poly;
            let scale = expected.norm_inf().max(1e-300);
            for k in 0..=(m1 + m2) {
                worst = worst.max((got.coeff(k) - expected.coeff(k)).norm() / scale);
            }
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} over 50 pairs x 20 modes"))
}

fn flat_cone_spectrum() -> Outcome {
    let strip = (-3.5, 3.5);
    let mut worst_root = 0.0f64;
    let mut worst_relation = 0.0f64;
    let mut ok = true;
    for c in [0.5, 1.0, 2.0] {
        let cs = CrossSection::circle(c).unwrap();
        let a = FuchsOperator::flat_cone_laplacian(&cs, SignConvention::Analyst);
        let spec = boundary_spectrum(&a, &cs, strip, None).unwrap();
        let kmax = (3.5 * c).floor() as i64;
        let expected: Vec<f64> = (-kmax..=kmax).map(|k| k as f64 / c).collect();
        ok &= spec.len() == expected.len();
        for (e, &x) in spec.iter().zip(&expected) {
            worst_root = worst_root.max((e.z - x).norm());
            // Zero is a double root of the j = 0 mode; nonzero roots come from two modes.
            ok &= e.algebraic_multiplicity == 2;
            let (mu, _) = cs.mode(e.mode_index).unwrap();
            // (n - 1) z - z^2 lies in the spectrum of the nonpositive cross-section Laplacian.
            worst_relation = worst_relation.max((-e.z * e.z + mu).norm());
        }
    }
    ok &= worst_root <= 1e-10 && worst_relation <= 1e-10;
    outcome(ok, format!("root error {worst_root:.2e}, spectral relation {worst_relation:.2e}"))
}

fn exact_action(a: &FuchsOperator, mu: f64, b: &Bump, grid: LogGrid) -> RadialFunction {
    let m = a.order();
    RadialFunction::from_fn(grid, |r| {
        let d = b.derivatives(r.ln(), m);
        let sum: Complex64 = (0..=m)
            .map(|k| a.coeffs()[k].eval(r, mu) * if k % 2 == 0 { d[k] } else { -d[k] })
            .sum();
        sum / r.powi(m as i32)
    })
}

fn mellin_quantization() -> Outcome {
    let grid = LogGrid::new(0.1, 100.0, 2048).unwrap();
    let cs = CrossSection::circle(1.0).unwrap();
    let t = 16;
    let variable = FuchsOperator::new(
        vec![
            RadialSeries::scalar(&[-1.0, 0.3], t).unwrap(),
            RadialSeries::scalar(&[0.0, 0.5, -0.1], t).unwrap(),
            RadialSeries::scalar(&[1.0, 0.2], t).unwrap(),
        ],
        "variable",
    )
    .unwrap();
    let ops = [(FuchsOperator::flat_cone_laplacian(&cs, SignConvention::Analyst), 4.0), (variable, 0.0)];
    let bumps = [
        Bump { center: 0.8, half_width: 2.0 },
        Bump { center: 1.0, half_width: 1.8 },
        Bump { center: 1.2, half_width: 2.2 },
        Bump { center: 0.6, half_width: 1.6 },
        Bump { center: 1.5, half_width: 2.0 },
    ];
    let settings = ContourSettings::default();
    let (mut sup, mut spread) = (0.0f64, 0.0f64);
    for (a, mu) in &ops {
        for b in &bumps {
            let u = b.radial(grid);
            let exact = exact_action(a, *mu, b, grid);
            let outs: Vec<RadialFunction> =
                [-1.0, 0.0, 1.0].iter().map(|&beta| apply_operator_mellin(a, *mu, &u, beta, &settings).unwrap()).collect();
            sup = sup.max(outs[1].max_abs_diff(&exact));
            spread = spread.max(outs[0].max_abs_diff(&outs[1])).max(outs[2].max_abs_diff(&outs[1]));
        }
    }
    outcome(sup <= 1e-5 && spread <= 2e-5, format!("sup error {sup:.2e}, beta spread {spread:.2e}"))
}

fn oracle_consistency() -> Outcome {
    let mut ok = true;
    let mut worst_ratio = 0.0f64;
    let mut lambda_min = f64::NAN;
    for c in [0.5, 1.0, 1.5] {
        let model = ModelCone::flat(CrossSection::circle(c).unwrap());
        let exact = eigenvalues_exact_cone(&model, 200.0).unwrap().expanded(10);
        let fd = eigenvalues_fd(&model, 2048, 40).unwrap();
        let fd: Vec<(f64, f64)> = fd.iter().flat_map(|f| std::iter::repeat_n((f.value, f.error_estimate), f.multiplicity)).take(10).collect();
        ok &= exact.len() == 10 && fd.len() == 10;
        for (e, (v, err)) in exact.iter().zip(&fd) {
            let diff = (e - v).abs();
            ok &= diff <= *err;
            worst_ratio = worst_ratio.max(diff / err);
        }
        if c == 1.0 {
            lambda_min = exact[0];
        }
    }
    let lam_ok = (lambda_min - 5.783185962946785).abs() <= 1e-8;
    outcome(ok && lam_ok, format!("max |exact - fd| / estimate {worst_ratio:.2e}, lambda_min(c=1) = {lambda_min:.15}"))
}

fn dunford() -> Outcome {
    let eigs = eigenvalues_exact_cone(&ModelCone::flat(CrossSection::circle(1.0).unwrap()), 4000.0).unwrap();
    let (mut diff, mut spread) = (0.0f64, 0.0f64);
    for t in [0.05, 0.1, 0.5, 1.0] {
        let sum = heat_trace_sum(&eigs, t, None).unwrap().value;
        let vals: Vec<f64> = [PI / 6.0, PI / 4.0, PI / 3.0]
            .iter()
            .map(|&phi| dunford_heat_trace(&eigs, &Contour { phi, delta: 1.0 }, t).unwrap().value)
            .collect();
        diff = diff.max((vals[1] - sum).abs());
        for v in &vals {
            spread = spread.max((v - vals[1]).abs());
        }
    }
    outcome(diff <= 1e-9 && spread <= 1e-9, format!("max |dunford - sum| {diff:.2e}, phi spread {spread:.2e}"))
}

fn heat_trace_expansion() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let times = geometric_grid(1e-3, 0.05, 40).unwrap();
    let basis = ExpansionBasis::new(2, 1, 6, 0).unwrap();
    for c in [0.5, 1.0, 1.5] {
        let eigs = eigenvalues_exact_cone(&ModelCone::flat(CrossSection::circle(c).unwrap()), 40000.0).unwrap();
        let samples: Vec<HeatTraceSample> = times.iter().map(|&t| heat_trace_sum(&eigs, t, Some(1e-10)).unwrap()).collect();
        let fit = fit_heat_trace(&samples, &basis, Weighting::Relative).unwrap();
        let c0 = fit.coefficient(-1.0).unwrap();
        let c1 = fit.coefficient(-0.5).unwrap();
        let e0 = (c0 / (c / 4.0) - 1.0).abs();
        let e1 = (c1 / (-PI.sqrt() * c / 4.0) - 1.0).abs();
        let s2 = residual_order(&samples, &fit, Some(2)).unwrap().slope().unwrap_or(f64::NAN);
        let s3 = residual_order(&samples, &fit, Some(3)).unwrap().slope().unwrap_or(f64::NAN);
        ok &= e0 <= 0.01 && e1 <= 0.03 && (s2 - 0.0).abs() <= 0.2 && (s3 - 0.5).abs() <= 0.2;
        lines.push(format!("c={c}: C0 {e0:.1e}, C1 {e1:.1e}, slopes {s2:.3}/{s3:.3}"));
    }
    outcome(ok, lines.join("; "))
}

fn cutoff_moments() -> Outcome {
    let omega = CutoffFunction::standard();
    let mut worst = 0.0f64;
    let mut log_seen = false;
    let grid = [0.0, 0.5, 1.0, 2.0];
    for &j in &grid {
        for &nu in &grid {
            for tau in [0.1, 0.25, 0.5] {
                let m = cutoff_moment(&omega, j, nu, tau).unwrap();
                log_seen |= m.log_branch;
                worst = worst.max((m.numeric - m.closed_form).abs());
            }
        }
    }
    let m = cutoff_moment(&omega, 1.0, 1.0, 0.25).unwrap();
    let log_term = (m.closed_form - 0.25 * m.tail_constant - 0.25 * 4f64.ln()).abs();
    outcome(
        worst <= 1e-10 && log_seen && log_term <= 1e-14,
        format!("max |numeric - closed form| {worst:.2e} over 48 lattice points; log branch exercised"),
    )
}

fn kernel_scaling() -> Outcome {
    let k = |l: Complex64, r: f64, rp: f64| (r * rp).sqrt() * (-l.sqrt() * (r + rp)).exp();
    let samples: Vec<(Complex64, f64, f64)> = (0..12)
        .map(|i| {
            let f = i as f64;
            (Complex64::from_polar(0.2 + 0.3 * f, -1.2 + 0.2 * f), 0.1 + 0.07 * f, 0.9 - 0.05 * f)
        })
        .collect();
    let good = twisted_homogeneity_residual(k, -2.0, 2, &samples);
    let bad = twisted_homogeneity_residual(k, -1.0, 2, &samples);
    outcome(
        good.max_deviation <= 1e-12 && bad.max_deviation > 0.1,
        format!("deviation {:.2e} at mu = -2, {:.2e} at mu = -1", good.max_deviation, bad.max_deviation),
    )
}

fn weakly_parametric() -> Outcome {
    let sector = Sector::new(PI / 4.0, 1.0).unwrap();
    let qs: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
    let points: Vec<SymbolPoint> = qs.iter().map(|&q| SymbolPoint { xi: vec![q.sqrt()], rho: 0.0 }).collect();
    let lambda_abs: Vec<f64> = (0..7).map(|i| 50.0 * 10f64.powf(i as f64 / 3.0)).collect();
    let (mut coeff_err, mut slope_err) = (0.0f64, 0.0f64);
    for p in [1u32, 2] {
        let sym = ParamSymbol::resolvent(p, 0.0, sector).unwrap();
        let ray = WRay::central(2, &sym.sector).unwrap();
        let table = wp_coefficients(&sym, 7, &ray, &points).unwrap();
        for (i, &q) in qs.iter().enumerate() {
            for k in 0..=6 {
                // (q - l)^{-1} = -sum q^j l^{-1-j}; (q - l)^{-2} = sum (j + 1) q^j l^{-2-j}.
                let expected = if k % 2 == 1 {
                    0.0
                } else {
                    let j = (k / 2) as i32;
                    if p == 1 { -q.powi(j) } else { (j + 1) as f64 * q.powi(j) }
                };
                coeff_err = coeff_err.max((table.get(i, k).unwrap().value - expected).norm());
            }
            for n in [0, 2, 4] {
                let order = wp_remainder_order(&sym, &table, i, n, &ray, &lambda_abs).unwrap();
                let target = -(n as f64 + sym.shift) / 2.0;
                // At q = 0 the symbol is a single power, so every truncation past it is exact.
                let exact_tail = q == 0.0 && n > 0;
                slope_err = slope_err.max(match order.slope() {
                    Some(s) if !exact_tail => (s - target).abs(),
                    None if exact_tail => 0.0,
                    _ => f64::INFINITY,
                });
            }
        }
    }
    outcome(
        coeff_err <= 1e-6 && slope_err <= 0.1,
        format!("max coefficient error {coeff_err:.2e}, max slope deviation {slope_err:.3}"),
    )
}

fn run_cli(cmd: &str, config: &Path, out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_conetrace"))
        .args([cmd, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"cross_section": {"circle": {"c": 1.0}}, "trace": {"lambda_max": 4000, "t_grid": {"t_min": 0.01, "t_max": 0.2, "count": 30}}}"#,
    )
    .unwrap();
    let mut ok = true;
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        for cmd in ["spectrum", "ellipticity", "report", "wp"] {
            ok &= run_cli(cmd, &config, &out);
        }
    }
    let mut names: Vec<_> = std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut differing = Vec::new();
    for name in &names {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).ok();
        if b.as_deref() != Some(a.as_slice()) {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    ok &= differing.is_empty() && names.len() >= 8;
    outcome(ok, format!("{} output files compared, differing: {differing:?}", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("conormal composition identity", composition_identity, Duration::from_secs(5)),
        ("flat-cone boundary spectrum", flat_cone_spectrum, Duration::from_secs(1)),
        ("Mellin quantization", mellin_quantization, Duration::from_secs(30)),
        ("oracle self-consistency", oracle_consistency, Duration::from_secs(60)),
        ("Dunford representation", dunford, Duration::from_secs(30)),
        ("heat-trace expansion", heat_trace_expansion, Duration::from_secs(180)),
        ("cutoff-moment identity", cutoff_moments, Duration::from_secs(5)),
        ("kernel scaling", kernel_scaling, Duration::from_secs(1)),
        ("weakly parametric expansion", weakly_parametric, Duration::from_secs(30)),
        ("CLI determinism", determinism, Duration::from_secs(120)),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({}; {:.2} s of {} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
