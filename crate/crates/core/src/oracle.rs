//! Spectral truth on exact cones of radius one with a Dirichlet edge:
//! Bessel-zero eigenvalues, a finite-difference cross-check, heat traces as
//! eigenvalue sums, and the Dunford contour integral.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{ConeError, Result};
use crate::fuchs::{FuchsOperator, SignConvention};
use crate::quadrature::Adaptive;
use crate::spectral::{CrossSection, Sector};
use crate::tridiag;

/// Exact cone `(0, 1] x X` with the Friedrichs extension at the tip.
#[derive(Debug, Clone)]
pub struct ModelCone {
    pub cross_section: CrossSection,
    pub operator: FuchsOperator,
}

impl ModelCone {
    pub fn new(cross_section: CrossSection, operator: FuchsOperator) -> Result<Self> {
        if operator.order() != 2 {
            return Err(ConeError::UnsupportedSymbol(format!(
                "model cones need a second-order operator, got order {}",
                operator.order()
            )));
        }
        if operator.sign == Some(SignConvention::Analyst) {
            return Err(ConeError::InvalidInput(
                "model cone operator must use the geometer (nonnegative) sign".into(),
            ));
        }
        Ok(ModelCone { cross_section, operator })
    }

    /// The flat cone over `cross_section` with `-Delta`.
    pub fn flat(cross_section: CrossSection) -> Self {
        let operator = FuchsOperator::flat_cone_laplacian(&cross_section, SignConvention::Geometer);
        ModelCone { cross_section, operator }
    }

    /// Bessel order of one mode: the distance of the (real) conormal roots
    /// from their midpoint `(n-1)/2`.
    pub fn indicial_order(&self, mu: f64) -> Result<f64> {
        let p = self.operator.conormal(mu).poly;
        let roots = p.roots(1e-8)?;
        let mut zs: Vec<Complex64> = Vec::new();
        for r in &roots {
            for _ in 0..r.multiplicity {
                zs.push(r.z);
            }
        }
        if zs.len() != 2 {
            return Err(ConeError::UnsupportedSymbol(format!("conormal symbol at mu = {mu} is not quadratic")));
        }
        if zs.iter().any(|z| z.im.abs() > 1e-10 * (1.0 + z.norm())) {
            return Err(ConeError::UnsupportedSymbol(format!(
                "complex indicial roots {} and {} at mu = {mu}: not of Laplace type",
                zs[0], zs[1]
            )));
        }
        let centre = 0.5 * (zs[0].re + zs[1].re);
        let expected = (self.cross_section.dim as f64 - 1.0) / 2.0;
        if (centre - expected).abs() > 1e-9 * (1.0 + centre.abs()) {
            return Err(ConeError::UnsupportedSymbol(format!(
                "indicial roots centred at {centre}, expected (n-1)/2 = {expected}"
            )));
        }
        Ok(0.5 * (zs[0].re - zs[1].re).abs())
    }

    /// `(mode index, nu_j)` for every mode with `nu_j <= nu_max`; the
    /// orders increase with the mode eigenvalue.
    pub fn indicial_orders(&self, nu_max: f64) -> Result<Vec<(usize, f64, usize)>> {
        let mut out = Vec::new();
        let mut j = 0;
        while let Some((mu, mult)) = self.cross_section.mode(j) {
            let nu = self.indicial_order(mu)?;
            if nu > nu_max {
                return Ok(out);
            }
            out.push((j, nu, mult));
            j += 1;
        }
        Err(ConeError::IncompleteSpectrum(format!(
            "explicit cross-section list ends before indicial order {nu_max}"
        )))
    }
}

/// Sorted eigenvalues with multiplicities, complete up to `lambda_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueList {
    pub entries: Vec<(f64, usize)>,
    /// Every eigenvalue `<= lambda_max` is present; `None` for a finite spectrum.
    pub lambda_max: Option<f64>,
}

impl EigenvalueList {
    /// The complete spectrum of a finite-rank operator.
    pub fn finite(mut entries: Vec<(f64, usize)>) -> Self {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        EigenvalueList { entries, lambda_max: None }
    }

    pub fn complete_below(mut entries: Vec<(f64, usize)>, lambda_max: f64) -> Self {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        entries.retain(|e| e.0 <= lambda_max);
        EigenvalueList { entries, lambda_max: Some(lambda_max) }
    }

    /// `N(lambda)`: eigenvalues `<= lambda`, with multiplicity.
    pub fn counting(&self, lambda: f64) -> usize {
        self.entries.iter().take_while(|e| e.0 <= lambda).map(|e| e.1).sum()
    }

    pub fn smallest(&self) -> Option<f64> {
        self.entries.first().map(|e| e.0)
    }

    /// The `k` smallest eigenvalues repeated by multiplicity.
    pub fn expanded(&self, k: usize) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|&(l, m)| std::iter::repeat_n(l, m))
            .take(k)
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "multiplicity"])?;
        for (l, m) in &self.entries {
            w.write_record([format!("{l:.16e}"), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `lambda, multiplicity` rows; the list is taken as complete below
    /// `lambda_max` when given, else as the full finite spectrum.
    pub fn read_csv(path: &Path, lambda_max: Option<f64>) -> Result<Self> {
        let mut rdr = crate::open_csv(path)?;
        let mut entries = Vec::new();
        for rec in rdr.deserialize() {
            let (l, m): (f64, usize) = rec?;
            if !(l.is_finite() && m > 0) {
                return Err(ConeError::InvalidInput(format!("bad eigenvalue row ({l}, {m})")));
            }
            entries.push((l, m));
        }
        Ok(match lambda_max {
            Some(lm) => Self::complete_below(entries, lm),
            None => Self::finite(entries),
        })
    }
}

/// Largest supported `lambda_max`, from the Bessel order guard.
pub const MAX_LAMBDA: f64 = bessel::MAX_ORDER * bessel::MAX_ORDER;

/// All eigenvalues `j_{nu_j,k}^2 <= lambda_max` of the exact cone.
///
/// Completeness: `j_{nu,1} > nu`, so modes with `nu_j^2 > lambda_max`
/// contribute nothing.
pub fn eigenvalues_exact_cone(model: &ModelCone, lambda_max: f64) -> Result<EigenvalueList> {
    if !model.operator.is_r_independent() {
        return Err(ConeError::Domain("exact spectrum needs r-independent coefficients".into()));
    }
    if !(lambda_max > 0.0) || lambda_max > MAX_LAMBDA {
        return Err(ConeError::Domain(format!(
            "lambda_max = {lambda_max} outside (0, {MAX_LAMBDA}] (Bessel order guard)"
        )));
    }
    let x_max = lambda_max.sqrt();
    let modes = model.indicial_orders(x_max)?;
    let per_mode: Vec<Vec<(f64, usize)>> = modes
        .par_iter()
        .map(|&(_, nu, mult)| {
            Ok(bessel::bessel_zeros_below(nu, x_max)?.into_iter().map(|x| (x * x, mult)).collect())
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<(f64, usize)> = per_mode.into_iter().flatten().collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, usize)> = Vec::with_capacity(all.len());
    for (l, m) in all {
        match merged.last_mut() {
            Some(last) if (l - last.0).abs() <= 1e-12 * l => last.1 += m,
            _ => merged.push((l, m)),
        }
    }
    Ok(EigenvalueList::complete_below(merged, lambda_max))
}

/// A finite-difference eigenvalue with its Richardson error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdEigenvalue {
    pub mode_index: usize,
    pub nu: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub multiplicity: usize,
}

/// Grading exponent of the mesh `r_i = (i/N)^p`.
const GRADING: f64 = 2.0;

/// Lowest `count` eigenvalues of `-(1/r)(r v')' + nu^2 v / r^2` on `(0, 1)`
/// with `v(1) = 0`, finite volumes in the measure `r dr`.
fn fd_mode(nu: f64, cells: usize, count: usize) -> Vec<f64> {
    let r = |i: usize| (i as f64 / cells as f64).powf(GRADING);
    let mid = |i: usize| 0.5 * (r(i) + r(i + 1));
    // With nu > 0 the tip value is pinned to zero.
    let first = if nu > 0.0 { 1 } else { 0 };
    let n = cells - first;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    let mut mass = vec![0.0; n];
    for (k, i) in (first..cells).enumerate() {
        let left_mid = if i == 0 { 0.0 } else { mid(i - 1) };
        let right_mid = mid(i);
        mass[k] = 0.5 * (right_mid * right_mid - left_mid * left_mid);
        let cr = right_mid / (r(i + 1) - r(i));
        let cl = if i == 0 { 0.0 } else { left_mid / (r(i) - r(i - 1)) };
        diag[k] = cr + cl;
        if i > 0 && nu > 0.0 {
            diag[k] += nu * nu * (right_mid / left_mid).ln();
        }
        if k + 1 < n {
            off[k] = -cr;
        }
    }
    // Symmetric form W^{-1/2} K W^{-1/2}.
    let d: Vec<f64> = diag.iter().zip(&mass).map(|(k, w)| k / w).collect();
    let e: Vec<f64> = (0..off.len()).map(|k| off[k] / (mass[k] * mass[k + 1]).sqrt()).collect();
    (0..count.min(n)).map(|k| tridiag::kth_eigenvalue_relative(&d, &e, k, 1e-15)).collect()
}

/// Lowest `count` eigenvalues (with multiplicity) from a finite-difference
/// discretization with `grid_size` cells, Richardson-extrapolated against
/// `grid_size / 2`.
pub fn eigenvalues_fd(model: &ModelCone, grid_size: usize, count: usize) -> Result<Vec<FdEigenvalue>> {
    if grid_size < 64 || !grid_size.is_multiple_of(2) {
        return Err(ConeError::InvalidInput(format!("grid size {grid_size} must be even and at least 64")));
    }
    if count == 0 || count > grid_size / 8 {
        return Err(ConeError::InvalidInput(format!(
            "grid of {grid_size} cells too coarse for {count} eigenvalues"
        )));
    }
    let mut found: Vec<FdEigenvalue> = Vec::new();
    let mut j = 0;
    while let Some((mu, mult)) = model.cross_section.mode(j) {
        let nu = model.indicial_order(mu)?;
        // Every eigenvalue of this mode exceeds nu^2.
        let expanded: usize = found.iter().map(|f| f.multiplicity).sum();
        if expanded >= count {
            let kth = kth_expanded(&found, count);
            if nu * nu > kth {
                break;
            }
        }
        let fine = fd_mode(nu, grid_size, count);
        let coarse = fd_mode(nu, grid_size / 2, count);
        for (f, c) in fine.iter().zip(&coarse) {
            found.push(FdEigenvalue {
                mode_index: j,
                nu,
                value: (4.0 * f - c) / 3.0,
                error_estimate: (f - c).abs() / 3.0,
                multiplicity: mult,
            });
        }
        found.sort_by(|a, b| a.value.total_cmp(&b.value));
        j += 1;
    }
    let mut out = Vec::new();
    let mut total = 0;
    for f in found {
        if total >= count {
            break;
        }
        total += f.multiplicity;
        out.push(f);
    }
    Ok(out)
}

fn kth_expanded(found: &[FdEigenvalue], k: usize) -> f64 {
    let mut total = 0;
    for f in found {
        total += f.multiplicity;
        if total >= k {
            return f.value;
        }
    }
    f64::INFINITY
}

/// `Tr e^{-tA}` at one time with a bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatTraceSample {
    pub t: f64,
    pub value: f64,
    pub tail_bound: f64,
}

/// Two-term Weyl fit `N(lambda) ~ a lambda + b sqrt(lambda)` on
/// `[lambda_max/4, lambda_max]`.
pub fn weyl_fit(eigs: &EigenvalueList) -> Option<(f64, f64)> {
    let lm = eigs.lambda_max?;
    let samples: Vec<(f64, f64)> = (0..=32)
        .map(|k| {
            let l = lm * (0.25 + 0.75 * k as f64 / 32.0);
            (l, eigs.counting(l) as f64)
        })
        .collect();
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(l, n) in &samples {
        let (f1, f2) = (l, l.sqrt());
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        y1 += f1 * n;
        y2 += f2 * n;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-300 {
        return None;
    }
    Some(((y1 * s22 - y2 * s12) / det, (s11 * y2 - s12 * y1) / det))
}

/// Safety factor on the fitted Weyl-law tail.
const TAIL_SAFETY: f64 = 2.0;

/// `sum mult e^{-t lambda}` with the tail beyond `lambda_max` bounded by
/// integrating the fitted Weyl law. Fails when the bound exceeds `tol`.
pub fn heat_trace_sum(eigs: &EigenvalueList, t: f64, tol: Option<f64>) -> Result<HeatTraceSample> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(ConeError::Domain(format!("heat-trace time t = {t} must be positive")));
    }
    // Smallest terms first for a stable sum.
    let value = eigs.entries.iter().rev().map(|&(l, m)| m as f64 * (-t * l).exp()).sum();
    let tail_bound = match (eigs.lambda_max, weyl_fit(eigs)) {
        (None, _) => 0.0,
        (Some(lm), Some((a, b))) => {
            let decay = (-t * lm).exp() / t;
            TAIL_SAFETY * (a.abs() * decay + b.abs() / (2.0 * lm.sqrt()) * decay)
        }
        (Some(lm), None) => (-t * lm).exp() / t * eigs.counting(lm) as f64 / lm,
    };
    if let Some(tol) = tol {
        if tail_bound > tol {
            return Err(ConeError::TailBound { bound: tail_bound, tol });
        }
    }
    Ok(HeatTraceSample { t, value, tail_bound })
}

pub fn write_heat_trace_csv(samples: &[HeatTraceSample], path: &Path) -> Result<()> {
    write_heat_trace_csv_to(samples, std::fs::File::create(path)?)
}

pub fn write_heat_trace_csv_to<W: std::io::Write>(samples: &[HeatTraceSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "value", "tail_bound"])?;
    for s in samples {
        w.write_record([format!("{:.16e}", s.t), format!("{:.16e}", s.value), format!("{:.16e}", s.tail_bound)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the first three columns `t, value, tail_bound` of a heat-trace table.
pub fn read_heat_trace_csv(path: &Path) -> Result<Vec<HeatTraceSample>> {
    let mut rdr = crate::open_csv(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| ConeError::InvalidInput(format!("heat-trace row lacks column {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| ConeError::InvalidInput(format!("bad number in heat-trace table: {e}")))
        };
        out.push(HeatTraceSample { t: get(0)?, value: get(1)?, tail_bound: get(2)? });
    }
    Ok(out)
}

/// The contour `Upsilon`: the ray `r e^{i phi}` inbound from infinity, the
/// arc `delta e^{i theta}` for `theta in [phi, 2 pi - phi]`, and the ray
/// `r e^{-i phi}` outbound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub phi: f64,
    pub delta: f64,
}

impl Contour {
    pub fn new(sector: Sector) -> Self {
        Contour { phi: sector.phi, delta: sector.delta }
    }

    /// Ray length beyond which `e^{-t Re lambda} < 1e-18`.
    pub fn ray_length(&self, t: f64) -> f64 {
        (self.delta * 2.0).max(18.0 * 10f64.ln() / (t * self.phi.cos()))
    }
}

/// Value of the Dunford integral with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunfordValue {
    pub value: f64,
    pub imag_residue: f64,
    pub error_estimate: f64,
}

/// `(i / 2 pi) int_Upsilon e^{-t lambda} sum mult / (lambda_i - lambda) d lambda`.
pub fn dunford_heat_trace(eigs: &EigenvalueList, contour: &Contour, t: f64) -> Result<DunfordValue> {
    let sector = Sector::new(contour.phi, contour.delta)?;
    if !(t > 0.0) {
        return Err(ConeError::Domain(format!("t = {t} must be positive")));
    }
    if let Some(&(l, _)) = eigs.entries.iter().find(|(l, _)| *l <= sector.delta) {
        return Err(ConeError::Domain(format!(
            "eigenvalue {l} lies inside the contour radius delta = {}",
            sector.delta
        )));
    }
    let resolvent_trace = |lambda: Complex64| -> Complex64 {
        eigs.entries.iter().map(|&(l, m)| m as f64 / (l - lambda)).sum()
    };
    let f = |lambda: Complex64| (-t * lambda).exp() * resolvent_trace(lambda);
    // The arc integrand reaches e^{t delta}; roundoff scales with it.
    let quad = Adaptive::new(16, 1e-14 * (t * contour.delta).exp(), 1e-13);
    let length = contour.ray_length(t);
    let up = Complex64::from_polar(1.0, contour.phi);
    let down = up.conj();

    // Split the rays at the points nearest to each eigenvalue cluster so that
    // the adaptive rule sees the near-poles.
    let mut breaks = vec![contour.delta];
    for &(l, _) in &eigs.entries {
        let foot = l * contour.phi.cos();
        if foot > contour.delta && foot < length && breaks.last().is_some_and(|b| foot > b * 1.05) {
            breaks.push(foot);
        }
    }
    breaks.push(length);

    let mut total = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    for w in breaks.windows(2) {
        let inbound = quad.integrate(|r: f64| -f(up * r) * up, w[0], w[1]);
        let outbound = quad.integrate(|r: f64| f(down * r) * down, w[0], w[1]);
        total += inbound.value + outbound.value;
        error += inbound.error + outbound.error;
    }
    let arc = quad.integrate(
        |theta: f64| {
            let lambda = Complex64::from_polar(contour.delta, theta);
            f(lambda) * Complex64::new(0.0, 1.0) * lambda
        },
        contour.phi,
        2.0 * PI - contour.phi,
    );
    total += arc.value;
    error += arc.error;
    // Beyond the truncation radius.
    let tail = 2.0 * (-t * length * contour.phi.cos()).exp()
        * resolvent_trace(up * length).norm()
        / (t * contour.phi.cos());
    let value = total * Complex64::new(0.0, 1.0 / (2.0 * PI));
    Ok(DunfordValue { value: value.re, imag_residue: value.im, error_estimate: (error + tail) / (2.0 * PI) })
}
