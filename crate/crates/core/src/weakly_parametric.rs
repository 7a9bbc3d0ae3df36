//! Parameter-dependent symbols `h(xi, rho, lambda)` and their expansion in
//! `w = lambda^{-1/d}`: principal parts, the coefficients
//! `h_k = (1/k!) d_w^k (w^{-mu} h(xi, rho, w^{-d}))|_{w=0}`, remainder orders
//! and sampled seminorms.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::spectral::Sector;

pub type Evaluator = Arc<dyn Fn(&[f64], f64, Complex64) -> Complex64 + Send + Sync>;

/// A symbol of declared order `order`, shift `shift` (the `mu` of the
/// expansion) and anisotropy `d`, analytic in `lambda` on the sector for
/// `|lambda| > 1` when `analytic` is set.
#[derive(Clone)]
pub struct ParamSymbol {
    evaluator: Evaluator,
    pub label: String,
    pub order: f64,
    pub shift: f64,
    pub anisotropy: u32,
    pub sector: Sector,
    pub analytic: bool,
    /// Offset of the weight line folded into `rho`.
    pub delta: f64,
}

impl fmt::Debug for ParamSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamSymbol")
            .field("label", &self.label)
            .field("order", &self.order)
            .field("shift", &self.shift)
            .field("anisotropy", &self.anisotropy)
            .field("sector", &self.sector)
            .finish()
    }
}

fn norm_sq(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

impl ParamSymbol {
    pub fn new<F>(label: impl Into<String>, order: f64, shift: f64, anisotropy: u32, sector: Sector, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, Complex64) -> Complex64 + Send + Sync + 'static,
    {
        if anisotropy == 0 {
            return Err(ConeError::InvalidInput("anisotropy d must be at least 1".into()));
        }
        if !(shift >= 0.0) {
            return Err(ConeError::InvalidInput(format!("shift mu = {shift} must be nonnegative")));
        }
        Ok(ParamSymbol {
            evaluator: Arc::new(f),
            label: label.into(),
            order,
            shift,
            anisotropy,
            sector,
            analytic: true,
            delta: 0.0,
        })
    }

    /// `(|xi|^2 + rho^2 + c - lambda)^{-p}` with `d = 2`, `mu = 2p`.
    pub fn resolvent(power: u32, c: f64, sector: Sector) -> Result<Self> {
        if power == 0 {
            return Err(ConeError::InvalidInput("resolvent power must be at least 1".into()));
        }
        let p = power as i32;
        Self::new(
            format!("resolvent_p{power}"),
            -2.0 * power as f64,
            2.0 * power as f64,
            2,
            sector,
            move |xi, rho, l| (Complex64::new(norm_sq(xi) + rho * rho + c, 0.0) - l).powi(-p),
        )
    }

    /// `lambda^{-1}` with `d = 1`, `mu = 1`.
    pub fn inverse_lambda(sector: Sector) -> Result<Self> {
        Self::new("inverse_lambda", -1.0, 1.0, 1, sector, |_, _, l| l.inv())
    }

    pub fn constant(value: f64, sector: Sector) -> Result<Self> {
        Self::new("constant", 0.0, 0.0, 1, sector, move |_, _, _| Complex64::new(value, 0.0))
    }

    pub fn eval(&self, xi: &[f64], rho: f64, lambda: Complex64) -> Complex64 {
        (self.evaluator)(xi, rho, lambda)
    }

    /// `w^{-mu} h(xi, rho, w^{-d})`.
    pub fn in_w(&self, xi: &[f64], rho: f64, w: Complex64) -> Complex64 {
        let lambda = w.powi(-(self.anisotropy as i32));
        self.eval(xi, rho, lambda) * w.powf(-self.shift)
    }
}

/// A ray `w = r e^{i theta}` with `w^{-d}` in the sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRay {
    pub theta: f64,
    pub radii: Vec<f64>,
}

impl WRay {
    pub fn new(theta: f64, radii: Vec<f64>, d: u32, sector: &Sector) -> Result<Self> {
        if radii.is_empty() {
            return Err(ConeError::InvalidInput("ray needs at least one radius".into()));
        }
        if radii.windows(2).any(|p| p[1] >= p[0]) || radii.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(ConeError::InvalidInput("ray radii must decrease inside (0, 1]".into()));
        }
        if !sector.contains(Complex64::from_polar(1.0, -(d as f64) * theta)) {
            return Err(ConeError::Domain(format!("w-ray angle {theta} leaves the sector for d = {d}")));
        }
        Ok(WRay { theta, radii })
    }

    /// The ray with `w^{-d}` on the negative real axis, radii `2^{-j}`.
    pub fn central(d: u32, sector: &Sector) -> Result<Self> {
        let radii = (0..12).map(|j| 0.5f64.powi(j)).collect();
        Self::new(PI / d as f64, radii, d, sector)
    }

    /// Largest half-opening of a sector of `w` around the ray whose image
    /// stays in the sector.
    pub fn half_opening(&self, d: u32, sector: &Sector) -> f64 {
        let arg = Complex64::from_polar(1.0, -(d as f64) * self.theta).arg().abs();
        (arg - sector.phi).max(0.0) / d as f64
    }

    pub fn point(&self, r: f64) -> Complex64 {
        Complex64::from_polar(r, self.theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolPoint {
    pub xi: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalPart {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

/// `lim tau^{-mu_hom} h(tau xi, tau rho, tau^d lambda)` by Richardson
/// extrapolation in `1/tau` over `tau = 2^p`, `p = 4..12`.
pub fn principal_part(sym: &ParamSymbol, mu_hom: f64, d: u32, point: &SymbolPoint, lambda: Complex64) -> Result<PrincipalPart> {
    if !(lambda.norm() >= 1.0) {
        return Err(ConeError::Domain(format!("principal part needs |lambda| >= 1, got {lambda}")));
    }
    let taus: Vec<f64> = (4..=12).map(|p| 2f64.powi(p)).collect();
    let values: Vec<Complex64> = taus
        .iter()
        .map(|&tau| {
            let xi: Vec<f64> = point.xi.iter().map(|x| tau * x).collect();
            sym.eval(&xi, tau * point.rho, lambda * tau.powi(d as i32)) * tau.powf(-mu_hom)
        })
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ConeError::Domain("symbol not finite along the scaling orbit".into()));
    }
    // Neville table in x = 1/tau, evaluated at x = 0.
    let x: Vec<f64> = taus.iter().map(|t| 1.0 / t).collect();
    let mut table = values.clone();
    let mut diagonal = vec![table[table.len() - 1]];
    let n = table.len();
    for level in 1..n {
        for i in (level..n).rev() {
            let (xa, xb) = (x[i - level], x[i]);
            table[i] = (table[i] * xa - table[i - 1] * xb) / (xa - xb);
        }
        diagonal.push(table[n - 1]);
    }
    let value = diagonal[diagonal.len() - 1];
    let diffs: Vec<f64> = diagonal.windows(2).map(|p| (p[1] - p[0]).norm()).collect();
    let error = diffs[diffs.len() - 1];
    let scale = value.norm().max(1e-300);
    let tail = &diffs[diffs.len() - 3..];
    let converged = error <= 1e-13 * scale || (tail[2] <= tail[1] && tail[1] <= tail[0]) || error <= 1e-8 * scale;
    Ok(PrincipalPart { value, error, converged })
}

/// Barycentric rational approximant.
#[derive(Debug, Clone)]
pub struct Rational {
    support: Vec<Complex64>,
    values: Vec<Complex64>,
    weights: Vec<Complex64>,
}

impl Rational {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = Complex64::new(0.0, 0.0);
        for ((&zj, &fj), &wj) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let d = z - zj;
            if d.norm() == 0.0 {
                return fj;
            }
            num += wj * fj / d;
            den += wj / d;
        }
        num / den
    }

    pub fn degree(&self) -> usize {
        self.support.len() - 1
    }
}

/// Adaptive Antoulas-Anderson rational fit of `values` at `points`, stopping
/// once the sampled error is below `tol * max |f|`. Returns the approximant
/// and its largest sampled error.
pub fn aaa(points: &[Complex64], values: &[Complex64], tol: f64, max_terms: usize) -> Result<(Rational, f64)> {
    if points.len() != values.len() || points.len() < 2 {
        return Err(ConeError::InvalidInput("rational fit needs matching sample lists".into()));
    }
    let fmax = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mean = values.iter().sum::<Complex64>() / values.len() as f64;
    let mut in_support = vec![false; points.len()];
    let mut approx = vec![mean; points.len()];
    let mut support = Vec::new();
    let mut best: Option<(Rational, f64)> = None;
    for _ in 0..max_terms.min(points.len() / 2) {
        let next = (0..points.len())
            .filter(|&i| !in_support[i])
            .max_by(|&a, &b| (values[a] - approx[a]).norm().total_cmp(&(values[b] - approx[b]).norm()))
            .ok_or_else(|| ConeError::NoConvergence("rational fit ran out of samples".into()))?;
        in_support[next] = true;
        support.push(next);
        let rows: Vec<usize> = (0..points.len()).filter(|&i| !in_support[i]).collect();
        let m = support.len();
        let mut loewner = DMatrix::<Complex64>::zeros(rows.len(), m);
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                loewner[(r, c)] = (values[i] - values[j]) / (points[i] - points[j]);
            }
        }
        let svd = loewner.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| ConeError::NoConvergence("SVD of the Loewner matrix failed".into()))?;
        let smallest = (0..svd.singular_values.len())
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(0);
        let weights: Vec<Complex64> = if svd.singular_values.len() < m {
            // Fewer rows than columns: any null vector works; take the last row.
            (0..m).map(|c| v_t[(v_t.nrows() - 1, c)].conj()).collect()
        } else {
            (0..m).map(|c| v_t[(smallest, c)].conj()).collect()
        };
        let r = Rational {
            support: support.iter().map(|&j| points[j]).collect(),
            values: support.iter().map(|&j| values[j]).collect(),
            weights,
        };
        let mut err: f64 = 0.0;
        for i in 0..points.len() {
            approx[i] = if in_support[i] { values[i] } else { r.eval(points[i]) };
            err = err.max((values[i] - approx[i]).norm());
        }
        let done = err <= tol * fmax.max(1e-300);
        if best.as_ref().is_none_or(|b| err < b.1) {
            best = Some((r, err));
        }
        if done {
            break;
        }
    }
    best.ok_or_else(|| ConeError::NoConvergence("rational fit produced no approximant".into()))
}

/// Largest supported expansion depth.
pub const MAX_TERMS: usize = 8;

const CIRCLE_NODES: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub k: usize,
    pub xi: Vec<f64>,
    pub rho: f64,
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub label: String,
    pub shift: f64,
    pub anisotropy: u32,
    pub terms: usize,
    pub entries: Vec<CoefficientEntry>,
}

impl CoefficientTable {
    /// `h_k` at the `point`-th sample point.
    pub fn get(&self, point: usize, k: usize) -> Option<&CoefficientEntry> {
        self.entries.get(point * self.terms + k)
    }

    pub fn point_count(&self) -> usize {
        self.entries.len() / self.terms.max(1)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "xi", "rho", "re", "im", "err"])?;
        for e in &self.entries {
            let xi: Vec<String> = e.xi.iter().map(|x| format!("{x:.16e}")).collect();
            w.write_record([
                e.k.to_string(),
                xi.join(";"),
                format!("{:.16e}", e.rho),
                format!("{:.16e}", e.value.re),
                format!("{:.16e}", e.value.im),
                format!("{:.16e}", e.error),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Taylor coefficients `c_0..c_{K-1}` at 0 from a trapezoid rule on `|w| = rho`.
fn circle_coefficients(f: &Rational, rho: f64, k: usize) -> Vec<Complex64> {
    let samples: Vec<Complex64> = (0..CIRCLE_NODES)
        .map(|l| f.eval(Complex64::from_polar(rho, 2.0 * PI * l as f64 / CIRCLE_NODES as f64)))
        .collect();
    (0..k)
        .map(|k| {
            let s: Complex64 = samples
                .iter()
                .enumerate()
                .map(|(l, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * l) as f64 / CIRCLE_NODES as f64))
                .sum();
            s / (CIRCLE_NODES as f64 * rho.powi(k as i32))
        })
        .collect()
}

fn coefficients_at(sym: &ParamSymbol, terms: usize, ray: &WRay, point: &SymbolPoint) -> Result<Vec<CoefficientEntry>> {
    let d = sym.anisotropy;
    let radius = ray.radii[0];
    let half = 0.9 * ray.half_opening(d, &sym.sector);
    let angles = 9;
    let rings = 24;
    let mut ws = Vec::new();
    for a in 0..angles {
        let offset = if angles > 1 { half * (2.0 * a as f64 / (angles - 1) as f64 - 1.0) } else { 0.0 };
        for j in 1..=rings {
            ws.push(Complex64::from_polar(radius * j as f64 / rings as f64, ray.theta + offset));
        }
    }
    for &r in &ray.radii[1..] {
        ws.push(ray.point(r));
    }
    let vals: Vec<Complex64> = ws.iter().map(|&w| sym.in_w(&point.xi, point.rho, w)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(ConeError::Domain("symbol not finite on the sampled w-region".into()));
    }
    let (fit, fit_err) = aaa(&ws, &vals, 1e-14, 40)?;
    let outer = circle_coefficients(&fit, 0.5 * radius, terms);
    let inner = circle_coefficients(&fit, 0.25 * radius, terms);
    Ok((0..terms)
        .map(|k| {
            let value = outer[k];
            let error = (outer[k] - inner[k]).norm() + fit_err / (0.5 * radius).powi(k as i32);
            CoefficientEntry {
                k,
                xi: point.xi.clone(),
                rho: point.rho,
                value,
                error,
                converged: error <= 1e-8 * (1.0 + value.norm()),
            }
        })
        .collect())
}

/// `h_k` for `k < terms` at each point.
///
/// The limit `w -> 0` sits on the boundary of the admissible region, so
/// `w^{-mu} h(w^{-d})` is sampled on a sector around the ray, continued by
/// a rational fit, and its Taylor coefficients are read off on two circles.
pub fn wp_coefficients(sym: &ParamSymbol, terms: usize, ray: &WRay, points: &[SymbolPoint]) -> Result<CoefficientTable> {
    if terms == 0 || terms > MAX_TERMS {
        return Err(ConeError::InvalidInput(format!("expansion depth K = {terms} outside 1..={MAX_TERMS}")));
    }
    if !sym.analytic {
        return Err(ConeError::UnsupportedSymbol(format!("{} is not declared analytic in lambda", sym.label)));
    }
    if ray.half_opening(sym.anisotropy, &sym.sector) <= 0.0 {
        return Err(ConeError::Domain("ray lies on the sector boundary; no room for sampling".into()));
    }
    let per_point: Vec<Vec<CoefficientEntry>> =
        points.par_iter().map(|p| coefficients_at(sym, terms, ray, p)).collect::<Result<_>>()?;
    Ok(CoefficientTable {
        label: sym.label.clone(),
        shift: sym.shift,
        anisotropy: sym.anisotropy,
        terms,
        entries: per_point.into_iter().flatten().collect(),
    })
}

/// `h(w^{-d}) - sum_{k<N} w^{k+mu} h_k` at one point.
pub fn wp_remainder(sym: &ParamSymbol, table: &CoefficientTable, point: usize, n: usize, w: Complex64) -> Result<Complex64> {
    if n > table.terms {
        return Err(ConeError::InvalidInput(format!("{n} terms requested, table has {}", table.terms)));
    }
    let first = table.get(point, 0).ok_or_else(|| ConeError::InvalidInput(format!("no point {point} in table")))?;
    let h = sym.eval(&first.xi, first.rho, w.powi(-(sym.anisotropy as i32)));
    let mut partial = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let e = table.get(point, k).expect("table entries are complete per point");
        partial += w.powf(k as f64 + sym.shift) * e.value;
    }
    Ok(h - partial)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RemainderOrder {
    Slope { slope: f64, points: usize },
    Saturated { max_remainder: f64 },
}

impl RemainderOrder {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RemainderOrder::Slope { slope, .. } => Some(*slope),
            RemainderOrder::Saturated { .. } => None,
        }
    }
}

/// Log-log slope of the `N`-term remainder against `|lambda|` along the ray.
pub fn wp_remainder_order(
    sym: &ParamSymbol,
    table: &CoefficientTable,
    point: usize,
    n: usize,
    ray: &WRay,
    lambda_abs: &[f64],
) -> Result<RemainderOrder> {
    let d = sym.anisotropy as f64;
    let mut pts = Vec::new();
    let mut max_remainder: f64 = 0.0;
    for &l in lambda_abs {
        if !(l > 1.0) {
            return Err(ConeError::Domain(format!("|lambda| = {l} must exceed 1")));
        }
        let w = ray.point(l.powf(-1.0 / d));
        let r = wp_remainder(sym, table, point, n, w)?;
        let h = sym.eval(&table.get(point, 0).expect("point checked").xi, table.get(point, 0).expect("point checked").rho, w.powf(-d));
        let coeff_noise: f64 = (0..n)
            .map(|k| table.get(point, k).expect("point checked").error * w.norm().powf(k as f64 + sym.shift))
            .sum();
        let floor = 1e-13 * h.norm() + coeff_noise;
        max_remainder = max_remainder.max(r.norm());
        if r.norm() > floor {
            pts.push((l.ln(), r.norm().ln()));
        }
    }
    if pts.len() < 3 {
        return Ok(RemainderOrder::Saturated { max_remainder });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(RemainderOrder::Slope { slope: sxy / sxx, points: pts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormSample {
    pub w_abs: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub k: usize,
    pub samples: Vec<SeminormSample>,
    /// Sampled suprema grow as `|w| -> 0`.
    pub growth: bool,
    /// Finite differences at two step sizes disagree.
    pub inconclusive: bool,
}

/// `d_w^k h(xi, rho, w^{-d})` by central differences along `w`.
fn w_derivative(sym: &ParamSymbol, y: &[f64], w: Complex64, k: usize, eps: f64) -> Complex64 {
    let d = sym.anisotropy as i32;
    let (xi, rho) = y.split_at(y.len() - 1);
    let g = |w: Complex64| sym.eval(xi, rho[0], w.powi(-d));
    let step = w / w.norm() * eps;
    match k {
        0 => g(w),
        1 => (g(w + step) - g(w - step)) / (2.0 * step),
        _ => (g(w + step) - 2.0 * g(w) + g(w - step)) / (step * step),
    }
}

/// Largest weighted mixed derivative of total `(xi, rho)`-order at most 2.
fn weighted_sup(sym: &ParamSymbol, y: &[f64], w: Complex64, k: usize, nu: f64, rel: f64) -> f64 {
    let bracket = (1.0 + norm_sq(y)).sqrt();
    let h = rel * bracket;
    let eps = rel * w.norm();
    let at = |dy: &[(usize, f64)]| {
        let mut z = y.to_vec();
        for &(i, s) in dy {
            z[i] += s;
        }
        w_derivative(sym, &z, w, k, eps)
    };
    let weight = |order: i32| bracket.powf(-nu - k as f64 + order as f64);
    let mut best = weight(0) * at(&[]).norm();
    let dim = y.len();
    for i in 0..dim {
        let d1 = (at(&[(i, h)]) - at(&[(i, -h)])) / (2.0 * h);
        best = best.max(weight(1) * d1.norm());
        for j in i..dim {
            let d2 = if i == j {
                (at(&[(i, h)]) - 2.0 * at(&[]) + at(&[(i, -h)])) / (h * h)
            } else {
                (at(&[(i, h), (j, h)]) - at(&[(i, h), (j, -h)]) - at(&[(i, -h), (j, h)]) + at(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            };
            best = best.max(weight(2) * d2.norm());
        }
    }
    best
}

/// Sampled `pi_{w,k}` over `grid` for each `w`.
pub fn seminorm_sample(sym: &ParamSymbol, k: usize, nu: f64, grid: &[SymbolPoint], ws: &[Complex64]) -> Result<SeminormReport> {
    if k > 2 {
        return Err(ConeError::InvalidInput(format!("w-derivative order {k} above 2")));
    }
    if grid.is_empty() || ws.is_empty() {
        return Err(ConeError::InvalidInput("seminorm sampling needs points and w values".into()));
    }
    let mut samples = Vec::new();
    let mut inconclusive = false;
    for &w in ws {
        let mut sup: f64 = 0.0;
        for p in grid {
            let mut y = p.xi.clone();
            y.push(p.rho);
            let a = weighted_sup(sym, &y, w, k, nu, 1e-2);
            let b = weighted_sup(sym, &y, w, k, nu, 2e-2);
            if (a - b).abs() > 0.1 * a.max(b) && a.max(b) > 1e-8 {
                inconclusive = true;
            }
            sup = sup.max(a);
        }
        samples.push(SeminormSample { w_abs: w.norm(), sup });
    }
    samples.sort_by(|a, b| b.w_abs.total_cmp(&a.w_abs));
    let first = samples[0].sup;
    let last = samples[samples.len() - 1].sup;
    let growth = samples.len() > 1 && last > 4.0 * first.max(1e-300) && last > 1e-12;
    Ok(SeminormReport { k, samples, growth, inconclusive })
}
