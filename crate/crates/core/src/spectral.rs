//! Boundary spectrum, weight-line ellipticity, parameter-ellipticity on a
//! sector and the conormal parametrix correction.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::fuchs::FuchsOperator;
use crate::poly::Poly;
use crate::tridiag;

/// Two roots closer than this (relative) are treated as the same point.
const MERGE_TOL: f64 = 1e-9;
/// Tolerance for "on the weight line".
const LINE_TOL: f64 = 1e-10;
/// Root multiplicity tolerance for the derivative test.
const MULT_TOL: f64 = 1e-8;
/// Extra modes checked beyond the cap for stray roots in the strip.
const CAP_WINDOW: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Circle of length `2 pi c`: `mu_j = j^2 / c^2`.
    Circle { c: f64 },
    Explicit,
}

/// Spectrum of `-Delta_X` on the cross-section, as `(mu, multiplicity)` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub dim: usize,
    pub generator: Generator,
    explicit: Vec<(f64, usize)>,
}

impl CrossSection {
    pub fn circle(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(ConeError::InvalidInput(format!("circle parameter c = {c} must be positive")));
        }
        Ok(CrossSection { dim: 1, generator: Generator::Circle { c }, explicit: Vec::new() })
    }

    pub fn explicit(dim: usize, modes: Vec<(f64, usize)>) -> Result<Self> {
        if dim == 0 {
            return Err(ConeError::InvalidInput("cross-section dimension must be at least 1".into()));
        }
        if modes.is_empty() {
            return Err(ConeError::InvalidInput("empty eigenvalue list".into()));
        }
        for w in modes.windows(2) {
            if w[1].0 < w[0].0 {
                return Err(ConeError::InvalidInput("eigenvalues must be nondecreasing".into()));
            }
        }
        if modes.iter().any(|&(mu, mult)| !(mu >= 0.0 && mu.is_finite()) || mult == 0) {
            return Err(ConeError::InvalidInput(
                "eigenvalues must be finite and nonnegative with positive multiplicity".into(),
            ));
        }
        Ok(CrossSection { dim, generator: Generator::Explicit, explicit: modes })
    }

    /// Mode `j`, or `None` past the end of an explicit list.
    pub fn mode(&self, j: usize) -> Option<(f64, usize)> {
        match self.generator {
            Generator::Circle { c } => {
                let mu = (j * j) as f64 / (c * c);
                Some((mu, if j == 0 { 1 } else { 2 }))
            }
            Generator::Explicit => self.explicit.get(j).copied(),
        }
    }

    /// Number of modes, `None` when unbounded.
    pub fn len(&self) -> Option<usize> {
        match self.generator {
            Generator::Circle { .. } => None,
            Generator::Explicit => Some(self.explicit.len()),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    /// All modes with `mu <= mu_max`.
    pub fn modes_up_to(&self, mu_max: f64) -> Vec<(usize, f64, usize)> {
        let mut out = Vec::new();
        let mut j = 0;
        while let Some((mu, mult)) = self.mode(j) {
            if mu > mu_max {
                break;
            }
            out.push((j, mu, mult));
            j += 1;
        }
        out
    }

    /// Area (volume) of the cross-section, known only for circles.
    pub fn circle_parameter(&self) -> Option<f64> {
        match self.generator {
            Generator::Circle { c } => Some(c),
            Generator::Explicit => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightLine {
    pub gamma: f64,
    pub real_part: f64,
}

impl WeightLine {
    pub fn new(gamma: f64, n: usize) -> Self {
        WeightLine { gamma, real_part: (n as f64 + 1.0) / 2.0 - gamma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpectrumEntry {
    pub z: Complex64,
    pub mode_index: usize,
    pub algebraic_multiplicity: usize,
}

/// Modes scanned at most when choosing a default cap.
const MAX_DEFAULT_CAP: usize = 4096;

/// Default cap: smallest `J` whose conormal symbol has no root with
/// `|z| <= R`, `R` the strip edge, by the bound `|a_0| > sum_{k>=1} |a_k| R^k`.
pub fn default_mode_cap(a: &FuchsOperator, cs: &CrossSection, strip: (f64, f64)) -> usize {
    let edge = strip.0.abs().max(strip.1.abs());
    let tip: Vec<_> = a.coeffs().iter().map(|s| s.at_zero()).collect();
    let mut j = 0;
    while let Some((mu, _)) = cs.mode(j) {
        let lead = tip[0].eval(mu).norm();
        let rest: f64 = tip.iter().enumerate().skip(1).map(|(k, c)| c.eval(mu).norm() * edge.powi(k as i32)).sum();
        if lead > rest || j >= MAX_DEFAULT_CAP {
            return j;
        }
        j += 1;
    }
    j
}

fn mode_roots(a: &FuchsOperator, j: usize, mu: f64) -> Result<Vec<crate::poly::Root>> {
    let p = a.conormal(mu).poly;
    if p.is_zero() {
        return Err(ConeError::InvalidOperator(format!(
            "conormal symbol vanishes identically at mode {j} (mu = {mu})"
        )));
    }
    p.roots(MULT_TOL)
}

fn in_strip(z: Complex64, strip: (f64, f64)) -> bool {
    z.re >= strip.0 - LINE_TOL && z.re <= strip.1 + LINE_TOL
}

/// Roots of the conormal symbol over all modes with real part in `strip`,
/// merged across modes (multiplicities add) and sorted by `(Re z, Im z)`.
pub fn boundary_spectrum(
    a: &FuchsOperator,
    cs: &CrossSection,
    strip: (f64, f64),
    mode_cap: Option<usize>,
) -> Result<Vec<BoundarySpectrumEntry>> {
    if !(strip.0 <= strip.1) {
        return Err(ConeError::InvalidInput(format!("empty strip [{}, {}]", strip.0, strip.1)));
    }
    let cap = mode_cap.unwrap_or_else(|| default_mode_cap(a, cs, strip));
    let cap = cs.len().map_or(cap, |len| cap.min(len));

    // Stray-root test on the modes just past the cap.
    for j in cap..cap + CAP_WINDOW {
        let Some((mu, _)) = cs.mode(j) else { break };
        if let Some(r) = mode_roots(a, j, mu)?.into_iter().find(|r| in_strip(r.z, strip)) {
            return Err(ConeError::IncompleteStrip(format!(
                "mode {j} (mu = {mu}) beyond mode_cap = {cap} has root {} in the strip",
                r.z
            )));
        }
    }

    let per_mode: Vec<Vec<BoundarySpectrumEntry>> = (0..cap)
        .into_par_iter()
        .map(|j| {
            let (mu, mult) = cs.mode(j).expect("cap bounded by list length");
            Ok(mode_roots(a, j, mu)?
                .into_iter()
                .filter(|r| in_strip(r.z, strip))
                .map(|r| BoundarySpectrumEntry {
                    z: r.z,
                    mode_index: j,
                    algebraic_multiplicity: r.multiplicity * mult,
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut merged: Vec<BoundarySpectrumEntry> = Vec::new();
    for e in per_mode.into_iter().flatten() {
        match merged.iter_mut().find(|m| (m.z - e.z).norm() <= MERGE_TOL * (1.0 + e.z.norm())) {
            Some(m) => m.algebraic_multiplicity += e.algebraic_multiplicity,
            None => merged.push(e),
        }
    }
    merged.sort_by(|x, y| x.z.re.total_cmp(&y.z.re).then(x.z.im.total_cmp(&y.z.im)));
    Ok(merged)
}

/// Whether the boundary spectrum avoids the line `Re z = (n+1)/2 - gamma`,
/// with the distance from the line to the nearest entry.
pub fn check_weight_ellipticity(a: &FuchsOperator, cs: &CrossSection, gamma: f64) -> Result<(bool, f64)> {
    let line = WeightLine::new(gamma, cs.dim).real_part;
    if a.order() == 0 {
        // Constant conormal symbol: invertible on every line unless it vanishes.
        let bad = (0..cs.len().unwrap_or(1)).any(|j| {
            cs.mode(j).is_some_and(|(mu, _)| a.conormal(mu).poly.is_zero())
        });
        return Ok(if bad { (false, 0.0) } else { (true, f64::INFINITY) });
    }
    let mut half = 1.0;
    loop {
        let entries = boundary_spectrum(a, cs, (line - half, line + half), None)?;
        if let Some(margin) = entries.iter().map(|e| (e.z.re - line).abs()).reduce(f64::min) {
            return Ok((margin > LINE_TOL, margin));
        }
        if half >= 64.0 {
            return Ok((true, half));
        }
        half *= 2.0;
    }
}

/// The closed sector `Lambda = {phi <= arg lambda <= 2 pi - phi}` and the
/// radius `delta` beyond which invertibility is certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub phi: f64,
    pub delta: f64,
}

impl Sector {
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        if !(phi > 0.0 && phi < PI / 2.0) {
            return Err(ConeError::InvalidInput(format!("sector angle {phi} outside (0, pi/2)")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ConeError::InvalidInput(format!("sector radius {delta} must be positive")));
        }
        Ok(Sector { phi, delta })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() == 0.0 || z.arg().abs() >= self.phi
    }

    /// Distance from `z` to the full closed sector (including 0).
    pub fn distance(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            return 0.0;
        }
        let rays = [Complex64::from_polar(1.0, self.phi), Complex64::from_polar(1.0, -self.phi)];
        rays.iter()
            .map(|u| {
                let t = (z * u.conj()).re.max(0.0);
                (z - u * t).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Membership in `Lambda_delta = Lambda ∩ {|lambda| >= delta}`.
    pub fn contains_beyond_delta(&self, z: Complex64) -> bool {
        z.norm() >= self.delta && z.arg().abs() >= self.phi
    }

    /// Distance from `z` to `Lambda_delta`.
    pub fn distance_beyond_delta(&self, z: Complex64) -> f64 {
        if self.contains_beyond_delta(z) {
            return 0.0;
        }
        let mut best = self.distance_to_arc(z);
        for u in [Complex64::from_polar(1.0, self.phi), Complex64::from_polar(1.0, -self.phi)] {
            let t = (z * u.conj()).re.max(self.delta);
            best = best.min((z - u * t).norm());
        }
        best
    }

    fn arc_endpoints(&self) -> [Complex64; 2] {
        [Complex64::from_polar(self.delta, self.phi), Complex64::from_polar(self.delta, -self.phi)]
    }

    fn distance_to_arc(&self, z: Complex64) -> f64 {
        if z.norm() > 0.0 && z.arg().abs() >= self.phi {
            (z.norm() - self.delta).abs()
        } else {
            self.arc_endpoints().iter().map(|e| (z - e).norm()).fold(f64::INFINITY, f64::min)
        }
    }
}

/// Sampling parameters for the parameter-ellipticity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    /// Points on the half circle `(rho, s) = (cos t, sin t)`, `t in [0, pi]`.
    pub sphere_points: usize,
    /// Samples of `r` in `[0, 2]`.
    pub r_samples: usize,
    /// Support-line directions for the numerical-range polygon.
    pub range_directions: usize,
    /// Log-grid size for the model-cone discretization.
    pub log_grid_size: usize,
    /// Half-width `L` of the log-grid `s in [-L, L]`.
    pub log_half_width: f64,
    /// Modes checked in condition (iii); defaults to the boundary-spectrum cap.
    pub mode_cap: Option<usize>,
    /// Margins below this are inconclusive.
    pub tolerance: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            sphere_points: 129,
            r_samples: 9,
            range_directions: 128,
            log_grid_size: 400,
            log_half_width: 6.0,
            mode_cap: None,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Ok,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub ok: bool,
    pub status: CheckStatus,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionReport {
    fn new(status: CheckStatus, margin: f64) -> Self {
        ConditionReport { ok: status == CheckStatus::Ok, status, margin, mode_cap: None, note: None }
    }

    fn classify(margin: f64, tol: f64) -> CheckStatus {
        if margin == 0.0 {
            CheckStatus::Fail
        } else if margin < tol {
            CheckStatus::Inconclusive
        } else {
            CheckStatus::Ok
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub condition_i: ConditionReport,
    pub condition_ii: ConditionReport,
    pub condition_iii: ConditionReport,
    pub overall: bool,
    pub overall_status: CheckStatus,
}

/// Condition (i): minimal distance of the principal symbol on the unit
/// sphere to the sector.
fn interior_condition(a: &FuchsOperator, sector: &Sector, grid: &SamplingSpec) -> Result<ConditionReport> {
    let nr = grid.r_samples.max(1);
    let nt = grid.sphere_points.max(2);
    let mut margin = f64::INFINITY;
    for i in 0..nr {
        let r = if nr == 1 { 0.0 } else { 2.0 * i as f64 / (nr - 1) as f64 };
        for k in 0..nt {
            let t = PI * k as f64 / (nt - 1) as f64;
            let sigma = a.principal_symbol_b(r, t.cos(), t.sin())?;
            margin = margin.min(sector.distance(sigma));
        }
    }
    Ok(ConditionReport::new(ConditionReport::classify(margin, grid.tolerance), margin))
}

/// Outer polygon for the numerical range of a tridiagonal complex matrix
/// (`lower`, `diag`, `upper`), from the extreme eigenvalues of rotated
/// Hermitian parts.
fn numerical_range_polygon(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    directions: usize,
) -> Vec<Complex64> {
    let k = directions.max(8);
    let support: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / k as f64;
            let rot = Complex64::from_polar(1.0, theta);
            let d: Vec<f64> = diag.iter().map(|&x| (rot * x).re).collect();
            let off: Vec<f64> = upper
                .iter()
                .zip(lower)
                .map(|(&u, &l)| 0.5 * (rot * u + (rot * l).conj()).norm())
                .collect();
            (theta, tridiag::max_eigenvalue(&d, &off, 1e-15))
        })
        .collect();
    // Vertices: intersections of consecutive support lines
    // x cos t - y sin t = h.
    (0..k)
        .map(|i| {
            let (t1, h1) = support[i];
            let (t2, h2) = support[(i + 1) % k];
            let det = -t1.cos() * t2.sin() + t1.sin() * t2.cos();
            let x = (-h1 * t2.sin() + h2 * t1.sin()) / det;
            let y = (t1.cos() * h2 - t2.cos() * h1) / det;
            Complex64::new(x, y)
        })
        .collect()
}

fn segments_intersect(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let cross = |a: Complex64, b: Complex64| a.re * b.im - a.im * b.re;
    let d1 = cross(q2 - q1, p1 - q1);
    let d2 = cross(q2 - q1, p2 - q1);
    let d3 = cross(p2 - p1, q1 - p1);
    let d4 = cross(p2 - p1, q2 - p1);
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

fn point_segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (((z - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (z - (a + ab * t)).norm()
}

/// Distance between a convex polygon and `Lambda_delta`; zero if they meet.
fn polygon_sector_distance(poly: &[Complex64], sector: &Sector) -> f64 {
    let far = 10.0 * (poly.iter().map(|z| z.norm()).fold(0.0, f64::max) + sector.delta);
    let ends = sector.arc_endpoints();
    let rays = [(ends[0], ends[0] / sector.delta * far), (ends[1], ends[1] / sector.delta * far)];
    let mut best = f64::INFINITY;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        if sector.contains_beyond_delta(a) {
            return 0.0;
        }
        for &(r0, r1) in &rays {
            if segments_intersect(a, b, r0, r1) {
                return 0.0;
            }
            best = best.min(point_segment_distance(r0, a, b));
        }
        // Segment against the arc |lambda| = delta, |arg| >= phi.
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let mut candidates = vec![a, b];
        if len2 > 0.0 {
            let t = (-(a * ab.conj()).re / len2).clamp(0.0, 1.0);
            candidates.push(a + ab * t);
            // Crossings of the circle |z| = delta.
            let qa = len2;
            let qb = 2.0 * (a * ab.conj()).re;
            let qc = a.norm_sqr() - sector.delta * sector.delta;
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                for s in [(-qb - disc.sqrt()) / (2.0 * qa), (-qb + disc.sqrt()) / (2.0 * qa)] {
                    if (0.0..=1.0).contains(&s) {
                        let z = a + ab * s;
                        if z.arg().abs() >= sector.phi {
                            return 0.0;
                        }
                    }
                }
            }
        }
        for z in candidates {
            best = best.min(sector.distance_beyond_delta(z));
        }
    }
    best
}

/// Condition (iii) for one mode of a second-order operator.
///
/// With `u~ = exp((n+1)s/2) u` in `L^2(ds)`, `s = log r`, and
/// `p(w) = a2 (w - c)^2 + e`, the frozen model cone operator becomes
/// `a2 [d e d + (2 - 2 kappa) S + ((kappa - 1)^2 + 1) e] + e_c e`,
/// `e = exp(-2s)`, `kappa = (n+1)/2 - c`, `S = (e d + d e)/2` skew.
fn model_cone_margin(p: &Poly, n: usize, sector: &Sector, grid: &SamplingSpec) -> f64 {
    let a2 = p.coeff(2);
    let a1 = p.coeff(1);
    let a0 = p.coeff(0);
    let c = -a1 / (2.0 * a2);
    let e_c = a0 - a2 * c * c;
    let kappa = Complex64::new((n as f64 + 1.0) / 2.0, 0.0) - c;
    let skew = a2 * (2.0 - 2.0 * kappa);
    let mass = a2 * ((kappa - 1.0) * (kappa - 1.0) + 1.0) + e_c;

    let size = grid.log_grid_size.max(16);
    let l = grid.log_half_width;
    let h = 2.0 * l / (size + 1) as f64;
    let s = |i: f64| -l + h * (i + 1.0);
    let w = |i: f64| (-2.0 * s(i)).exp();

    let mut diag = vec![Complex64::new(0.0, 0.0); size];
    let mut upper = vec![Complex64::new(0.0, 0.0); size - 1];
    let mut lower = vec![Complex64::new(0.0, 0.0); size - 1];
    for i in 0..size {
        let fi = i as f64;
        let (wl, wr) = (w(fi - 0.5), w(fi + 0.5));
        diag[i] = a2 * (-(wl + wr) / (h * h)) + mass * w(fi);
        if i + 1 < size {
            let stiff = a2 * (wr / (h * h));
            let sk = skew * (wr / (2.0 * h));
            upper[i] = stiff + sk;
            lower[i] = stiff - sk;
        }
    }
    let poly = numerical_range_polygon(&lower, &diag, &upper, grid.range_directions);
    polygon_sector_distance(&poly, sector)
}

fn model_cone_condition(
    a: &FuchsOperator,
    cs: &CrossSection,
    sector: &Sector,
    grid: &SamplingSpec,
    cap: usize,
) -> ConditionReport {
    if a.order() != 2 {
        let mut r = ConditionReport::new(CheckStatus::Inconclusive, f64::NAN);
        r.note = Some(format!("model-cone certificate implemented for order 2, operator has order {}", a.order()));
        r.mode_cap = Some(cap);
        return r;
    }
    let margins: Vec<f64> = (0..cap)
        .into_par_iter()
        .filter_map(|j| cs.mode(j))
        .map(|(mu, _)| model_cone_margin(&a.conormal(mu).poly, cs.dim, sector, grid))
        .collect();
    let margin = margins.into_iter().fold(f64::INFINITY, f64::min);
    // A sufficient certificate: failure to certify is never a proof of failure.
    let status = if margin >= grid.tolerance { CheckStatus::Ok } else { CheckStatus::Inconclusive };
    let mut r = ConditionReport::new(status, margin);
    r.mode_cap = Some(cap);
    r
}

/// Conditions (i)–(iii) of parameter-ellipticity on `sector` for weight `gamma`.
pub fn check_parameter_ellipticity(
    a: &FuchsOperator,
    cs: &CrossSection,
    sector: &Sector,
    gamma: f64,
    grid: &SamplingSpec,
) -> Result<EllipticityReport> {
    let condition_i = interior_condition(a, sector, grid)?;
    let (ok_ii, margin_ii) = check_weight_ellipticity(a, cs, gamma)?;
    let condition_ii = ConditionReport::new(
        if ok_ii {
            if margin_ii < grid.tolerance { CheckStatus::Inconclusive } else { CheckStatus::Ok }
        } else {
            CheckStatus::Fail
        },
        margin_ii,
    );
    let line = WeightLine::new(gamma, cs.dim).real_part;
    let cap = grid.mode_cap.unwrap_or_else(|| {
        let c = default_mode_cap(a, cs, (line - 1.0, line + 1.0)).max(1);
        cs.len().map_or(c, |len| c.min(len))
    });
    let condition_iii = model_cone_condition(a, cs, sector, grid, cap);
    let statuses = [condition_i.status, condition_ii.status, condition_iii.status];
    let overall_status = if statuses.contains(&CheckStatus::Fail) {
        CheckStatus::Fail
    } else if statuses.contains(&CheckStatus::Inconclusive) {
        CheckStatus::Inconclusive
    } else {
        CheckStatus::Ok
    };
    Ok(EllipticityReport {
        overall: condition_i.ok && condition_ii.ok && condition_iii.ok,
        condition_i,
        condition_ii,
        condition_iii,
        overall_status,
    })
}

/// `f(z) = p(z-m)^{-1} (1 - p(z-m) h0(z))` for `p` the conormal symbol at one
/// mode, so that `p(z-m) (h0 + f)(z) = 1`.
pub struct ConormalCorrection<F> {
    pub p: Poly,
    pub m: usize,
    roots: Vec<Complex64>,
    h0: F,
}

impl<F: Fn(Complex64) -> Complex64> ConormalCorrection<F> {
    fn inverse_at(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let w = z - self.m as f64;
        let pw = self.p.eval(w);
        let scale = self.p.norm_inf() * (1.0 + w.norm()).powi(self.m as i32);
        if pw.norm() <= 1e-12 * scale {
            let root = self
                .roots
                .iter()
                .copied()
                .min_by(|x, y| (x - w).norm().total_cmp(&(y - w).norm()))
                .unwrap_or(w);
            return Err(ConeError::Pole { z, root });
        }
        Ok((w, pw))
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let (_, pw) = self.inverse_at(z)?;
        Ok((1.0 - pw * (self.h0)(z)) / pw)
    }

    /// `h0 + f`.
    pub fn corrected(&self, z: Complex64) -> Result<Complex64> {
        Ok((self.h0)(z) + self.eval(z)?)
    }
}

pub fn parametrix_conormal_correction<F: Fn(Complex64) -> Complex64>(
    a: &FuchsOperator,
    mu: f64,
    h0: F,
) -> Result<ConormalCorrection<F>> {
    let p = a.conormal(mu).poly;
    if p.is_zero() {
        return Err(ConeError::InvalidOperator(format!("conormal symbol vanishes identically at mu = {mu}")));
    }
    let roots = p.roots(MULT_TOL)?.into_iter().map(|r| r.z).collect();
    Ok(ConormalCorrection { p, m: a.order(), roots, h0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchs::SignConvention;

    fn flat(c: f64, sign: SignConvention) -> (FuchsOperator, CrossSection) {
        let cs = CrossSection::circle(c).unwrap();
        (FuchsOperator::flat_cone_laplacian(&cs, sign), cs)
    }

    #[test]
    fn flat_cone_boundary_spectrum() {
        let (a, cs) = flat(1.0, SignConvention::Analyst);
        let spec = boundary_spectrum(&a, &cs, (-3.5, 3.5), None).unwrap();
        let got: Vec<(f64, usize)> = spec.iter().map(|e| (e.z.re, e.algebraic_multiplicity)).collect();
        let expected = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        assert_eq!(got.len(), expected.len());
        for ((z, mult), &x) in got.iter().zip(&expected) {
            assert!((z - x).abs() < 1e-12);
            assert_eq!(*mult, 2);
        }
    }

    #[test]
    fn half_integer_spectrum_for_c2() {
        let (a, cs) = flat(2.0, SignConvention::Analyst);
        let spec = boundary_spectrum(&a, &cs, (-1.0, 1.0), None).unwrap();
        let re: Vec<f64> = spec.iter().map(|e| e.z.re).collect();
        assert_eq!(re.len(), 5);
        for (x, y) in re.iter().zip([-1.0, -0.5, 0.0, 0.5, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_has_empty_spectrum() {
        let cs = CrossSection::circle(1.0).unwrap();
        let id = FuchsOperator::identity(4);
        assert!(boundary_spectrum(&id, &cs, (-5.0, 5.0), Some(10)).unwrap().is_empty());
        assert_eq!(check_weight_ellipticity(&id, &cs, 0.3).unwrap(), (true, f64::INFINITY));
    }

    #[test]
    fn insufficient_cap_detected() {
        let (a, cs) = flat(1.0, SignConvention::Analyst);
        let err = boundary_spectrum(&a, &cs, (-3.5, 3.5), Some(2));
        assert!(matches!(err, Err(ConeError::IncompleteStrip(_))));
    }

    #[test]
    fn weight_line_checks() {
        let (a, cs) = flat(1.0, SignConvention::Analyst);
        let (ok, margin) = check_weight_ellipticity(&a, &cs, 0.5).unwrap();
        assert!(ok);
        assert!((margin - 0.5).abs() < 1e-12);
        let (ok, margin) = check_weight_ellipticity(&a, &cs, 1.0).unwrap();
        assert!(!ok);
        assert!(margin < 1e-12);
    }

    #[test]
    fn sector_distances() {
        let s = Sector::new(PI / 4.0, 0.5).unwrap();
        assert!((s.distance(Complex64::new(1.0, 0.0)) - (PI / 4.0).sin()).abs() < 1e-15);
        assert_eq!(s.distance(Complex64::new(-1.0, 0.0)), 0.0);
        assert!(Sector::new(PI / 2.0, 1.0).is_err());
        // Small positive reals sit near the arc endpoints.
        let d = s.distance_beyond_delta(Complex64::new(0.0, 0.0));
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn geometer_laplacian_parameter_elliptic() {
        let (a, cs) = flat(1.0, SignConvention::Geometer);
        let sector = Sector::new(PI / 4.0, 0.5).unwrap();
        let report = check_parameter_ellipticity(&a, &cs, &sector, 0.5, &SamplingSpec::default()).unwrap();
        assert!(report.condition_i.ok);
        assert!((report.condition_i.margin - (PI / 4.0).sin()).abs() < 1e-12);
        assert!(report.condition_ii.ok);
        assert!(report.condition_iii.ok, "{:?}", report.condition_iii);
        assert!(report.overall);

        let report = check_parameter_ellipticity(&a, &cs, &sector, 1.0, &SamplingSpec::default()).unwrap();
        assert!(!report.condition_ii.ok);
        assert!(!report.overall);
    }

    #[test]
    fn analyst_laplacian_fails_interior_condition() {
        let (a, cs) = flat(1.0, SignConvention::Analyst);
        let sector = Sector::new(PI / 4.0, 0.5).unwrap();
        let report = check_parameter_ellipticity(&a, &cs, &sector, 0.5, &SamplingSpec::default()).unwrap();
        assert_eq!(report.condition_i.status, CheckStatus::Fail);
        assert!(!report.overall);
    }

    #[test]
    fn conormal_correction_identity() {
        let (a, _) = flat(1.0, SignConvention::Analyst);
        let p = a.conormal(1.0).poly;
        let pc = p.clone();
        let corr = parametrix_conormal_correction(&a, 1.0, move |z| 1.0 / pc.eval(z)).unwrap();
        for k in 0..20 {
            let z = Complex64::new(0.37 * k as f64 - 3.0, 0.9 - 0.11 * k as f64);
            let lhs = p.eval(z - 2.0) * corr.corrected(z).unwrap();
            assert!((lhs - 1.0).norm() < 1e-10);
        }
        let zero = parametrix_conormal_correction(&a, 1.0, |_| Complex64::new(0.0, 0.0)).unwrap();
        let z = Complex64::new(0.5, 0.5);
        assert!((zero.eval(z).unwrap() * p.eval(z - 2.0) - 1.0).norm() < 1e-14);
        // z - 2 = 1 is a root of z^2 - 1.
        assert!(matches!(zero.eval(Complex64::new(3.0, 0.0)), Err(ConeError::Pole { .. })));
    }
}
