//! Fitting the small-time heat-trace expansion
//! `sum C_k t^{(k-n-1)/m} + sum (C'_k log t + C''_k) t^{k/m}`,
//! the cutoff-moment identity and the twisted kernel scaling law.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::oracle::HeatTraceSample;
use crate::quadrature::Adaptive;

/// Largest accepted condition number of the scaled design matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Exponents are compared on this grid when merging columns.
const EXPONENT_TOL: f64 = 1e-12;

/// One design column: `t^e` or `t^e log t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub exponent: f64,
    pub log: bool,
}

impl Column {
    pub fn eval(&self, t: f64) -> f64 {
        let p = t.powf(self.exponent);
        if self.log {
            p * t.ln()
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionBasis {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub k_log: usize,
    /// Power columns (ascending exponent) followed by log columns.
    pub columns: Vec<Column>,
}

impl ExpansionBasis {
    /// Power exponents `(k-n-1)/m` for `k < K`; for each `k < K_log` a log
    /// column `t^{k/m} log t` and its companion `t^{k/m}`, merged with an
    /// equal power exponent when present.
    pub fn new(m: usize, n: usize, k: usize, k_log: usize) -> Result<Self> {
        if m == 0 {
            return Err(ConeError::InvalidInput("expansion basis needs order m >= 1".into()));
        }
        if k + k_log == 0 {
            return Err(ConeError::InvalidInput("expansion basis is empty".into()));
        }
        let mf = m as f64;
        let mut powers: Vec<f64> = (0..k).map(|k| (k as f64 - n as f64 - 1.0) / mf).collect();
        for j in 0..k_log {
            let e = j as f64 / mf;
            if !powers.iter().any(|p| (p - e).abs() < EXPONENT_TOL) {
                powers.push(e);
            }
        }
        powers.sort_by(f64::total_cmp);
        let mut columns: Vec<Column> = powers.into_iter().map(|exponent| Column { exponent, log: false }).collect();
        columns.extend((0..k_log).map(|j| Column { exponent: j as f64 / mf, log: true }));
        Ok(ExpansionBasis { m, n, k, k_log, columns })
    }

    pub fn power_count(&self) -> usize {
        self.columns.iter().filter(|c| !c.log).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    None,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub columns: Vec<Column>,
    /// One coefficient per column.
    pub values: Vec<f64>,
    pub t: Vec<f64>,
    pub data: Vec<f64>,
    /// `data - model` at each sample.
    pub residuals: Vec<f64>,
    pub condition: f64,
    pub weighting: Weighting,
}

impl ExpansionFit {
    pub fn model(&self, t: f64) -> f64 {
        self.columns.iter().zip(&self.values).map(|(c, v)| v * c.eval(t)).sum()
    }

    /// Model restricted to the columns accepted by `keep`.
    fn partial_model(&self, t: f64, keep: &dyn Fn(&Column) -> bool) -> f64 {
        self.columns.iter().zip(&self.values).filter(|(c, _)| keep(c)).map(|(c, v)| v * c.eval(t)).sum()
    }

    pub fn power_exponents(&self) -> Vec<f64> {
        self.columns.iter().filter(|c| !c.log).map(|c| c.exponent).collect()
    }

    pub fn power_coefficients(&self) -> Vec<f64> {
        self.columns.iter().zip(&self.values).filter(|(c, _)| !c.log).map(|(_, v)| *v).collect()
    }

    pub fn log_exponents(&self) -> Vec<f64> {
        self.columns.iter().filter(|c| c.log).map(|c| c.exponent).collect()
    }

    pub fn log_coefficients(&self) -> Vec<f64> {
        self.columns.iter().zip(&self.values).filter(|(c, _)| c.log).map(|(_, v)| *v).collect()
    }

    /// Coefficient of `t^exponent` (without log), if fitted.
    pub fn coefficient(&self, exponent: f64) -> Option<f64> {
        self.columns
            .iter()
            .zip(&self.values)
            .find(|(c, _)| !c.log && (c.exponent - exponent).abs() < EXPONENT_TOL)
            .map(|(_, v)| *v)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "data", "model", "residual"])?;
        for i in 0..self.t.len() {
            w.write_record([
                format!("{:.16e}", self.t[i]),
                format!("{:.16e}", self.data[i]),
                format!("{:.16e}", self.model(self.t[i])),
                format!("{:.16e}", self.residuals[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Least-squares fit of heat-trace samples to `basis`, each column scaled
/// to unit norm before the SVD solve.
pub fn fit_heat_trace(samples: &[HeatTraceSample], basis: &ExpansionBasis, weighting: Weighting) -> Result<ExpansionFit> {
    let cols = basis.columns.len();
    if samples.len() < 2 * cols {
        return Err(ConeError::InvalidInput(format!(
            "{} samples for {cols} basis columns; need at least {}",
            samples.len(),
            2 * cols
        )));
    }
    for s in samples {
        if !(s.t > 0.0 && s.t <= 0.5) {
            return Err(ConeError::InvalidInput(format!("sample time {} outside (0, 0.5]", s.t)));
        }
        if !(s.tail_bound <= 1e-10) {
            return Err(ConeError::InvalidInput(format!(
                "tail bound {:e} at t = {} exceeds 1e-10",
                s.tail_bound, s.t
            )));
        }
        if !s.value.is_finite() {
            return Err(ConeError::InvalidInput(format!("non-finite heat trace at t = {}", s.t)));
        }
    }
    let rows = samples.len();
    let weights: Vec<f64> = samples
        .iter()
        .map(|s| match weighting {
            Weighting::None => 1.0,
            Weighting::Relative if s.value != 0.0 => 1.0 / s.value.abs(),
            Weighting::Relative => 1.0,
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (i, s) in samples.iter().enumerate() {
        for (j, c) in basis.columns.iter().enumerate() {
            a[(i, j)] = weights[i] * c.eval(s.t);
        }
    }
    let mut scale = vec![1.0; cols];
    for j in 0..cols {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            scale[j] = norm;
            a.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    let b = DVector::from_iterator(rows, samples.iter().zip(&weights).map(|(s, w)| w * s.value));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= CONDITION_LIMIT) {
        return Err(ConeError::IllConditioned { cond: condition, limit: CONDITION_LIMIT });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| ConeError::NoConvergence(format!("least-squares solve: {e}")))?;
    let values: Vec<f64> = (0..cols).map(|j| x[j] / scale[j]).collect();
    let mut fit = ExpansionFit {
        columns: basis.columns.clone(),
        values,
        t: samples.iter().map(|s| s.t).collect(),
        data: samples.iter().map(|s| s.value).collect(),
        residuals: Vec::new(),
        condition,
        weighting,
    };
    fit.residuals = fit.t.iter().zip(&fit.data).map(|(&t, &d)| d - fit.model(t)).collect();
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ResidualOrder {
    Slope { slope: f64, intercept: f64, points: usize },
    Saturated { max_residual: f64 },
}

impl ResidualOrder {
    pub fn slope(&self) -> Option<f64> {
        match self {
            ResidualOrder::Slope { slope, .. } => Some(*slope),
            ResidualOrder::Saturated { .. } => None,
        }
    }
}

/// Relative noise floor of heat-trace residuals.
const RESIDUAL_NOISE: f64 = 1e-12;

/// Log-log slope of `|data - model|` against `t`.
///
/// With `keep = Some(K)` only the `K` leading power columns (and log columns
/// below the first dropped power exponent) enter the model, so the residual
/// exposes the first omitted term.
pub fn residual_order(samples: &[HeatTraceSample], fit: &ExpansionFit, keep: Option<usize>) -> Result<ResidualOrder> {
    let powers = fit.power_exponents();
    let cut = match keep {
        Some(k) if k < powers.len() => powers[k],
        Some(_) | None => f64::INFINITY,
    };
    let keep_col = |c: &Column| c.exponent < cut - EXPONENT_TOL;
    let mut pts = Vec::new();
    let mut max_residual: f64 = 0.0;
    for s in samples {
        let r = (s.value - fit.partial_model(s.t, &keep_col)).abs();
        max_residual = max_residual.max(r);
        let floor = RESIDUAL_NOISE * s.value.abs().max(1.0) + s.tail_bound;
        if r > floor {
            pts.push((s.t.ln(), r.ln()));
        }
    }
    if pts.len() < 3 {
        return Ok(ResidualOrder::Saturated { max_residual });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ConeError::InvalidInput("residual slope needs distinct times".into()));
    }
    let slope = sxy / sxx;
    Ok(ResidualOrder::Slope { slope, intercept: my - slope * mx, points: pts.len() })
}

/// Geometric grid of `count` times on `[t_min, t_max]`.
pub fn geometric_grid(t_min: f64, t_max: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || count < 2 {
        return Err(ConeError::InvalidInput(format!("bad t-grid [{t_min}, {t_max}] x {count}")));
    }
    let ratio = (t_max / t_min).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| t_min * (ratio * i as f64).exp()).collect())
}

/// Serializable fit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub log_exponents: Vec<f64>,
    pub log_coefficients: Vec<f64>,
    pub condition: f64,
    pub residual_slope: ResidualOrder,
}

impl FitReport {
    pub fn new(fit: &ExpansionFit, residual: ResidualOrder) -> Self {
        FitReport {
            exponents: fit.power_exponents(),
            coefficients: fit.power_coefficients(),
            log_exponents: fit.log_exponents(),
            log_coefficients: fit.log_coefficients(),
            condition: fit.condition,
            residual_slope: residual,
        }
    }
}

/// `omega(r) = psi(2 - r) / (psi(2 - r) + psi(r - 1))` with
/// `psi(x) = exp(-1/x)` for `x > 0`.
#[derive(Debug, Default)]
pub struct CutoffFunction {
    cache: Mutex<HashMap<(u64, u64), f64>>,
}

fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

impl CutoffFunction {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            let a = psi(2.0 - r);
            a / (a + psi(r - 1.0))
        }
    }

    /// Largest jump of the centred difference quotient across sampled
    /// points of `[0, 2.5]`, a numerical C^1 check.
    pub fn c1_defect(&self, samples: usize) -> f64 {
        let h = 1e-6;
        let d = |r: f64| (self.eval(r + h) - self.eval(r - h)) / (2.0 * h);
        let mut worst: f64 = 0.0;
        for i in 1..samples {
            let r = 2.5 * i as f64 / samples as f64;
            worst = worst.max((d(r + h) - d(r - h)).abs());
        }
        worst
    }

    /// `C_{j,nu} = int_1^2 omega(r) r^{j-nu-1} dr`, cached per `(j, nu)`.
    pub fn tail_constant(&self, j: f64, nu: f64) -> f64 {
        let key = (j.to_bits(), nu.to_bits());
        if let Some(&c) = self.cache.lock().expect("cutoff cache poisoned").get(&key) {
            return c;
        }
        let q = Adaptive::new(16, 1e-13, 1e-13);
        let c = q.integrate(|r: f64| self.eval(r) * r.powf(j - nu - 1.0), 1.0, 2.0).value;
        self.cache.lock().expect("cutoff cache poisoned").insert(key, c);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffMoment {
    /// Quadrature of `tau^nu int_tau^inf omega(r) r^{j-nu-1} dr`.
    pub numeric: f64,
    pub closed_form: f64,
    /// `int_1^inf omega r^{j-nu-1} dr`.
    pub tail_constant: f64,
    /// Coefficient of `tau^nu` in the closed form.
    pub power_coefficient: f64,
    /// Coefficient of `tau^j` (or of `tau^j log tau` on the log branch).
    pub tau_j_coefficient: f64,
    pub log_branch: bool,
}

/// Both sides of the moment identity
/// `tau^nu int_tau^inf omega r^{j-nu-1} dr = (C + 1/(j-nu)) tau^nu - tau^j/(j-nu)`
/// (`C tau^nu - tau^j log tau` when `nu = j`).
pub fn cutoff_moment(omega: &CutoffFunction, j: f64, nu: f64, tau: f64) -> Result<CutoffMoment> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(ConeError::Domain(format!("tau = {tau} outside (0, 1)")));
    }
    let q = Adaptive::new(16, 1e-13, 1e-13);
    let f = |r: f64| omega.eval(r) * r.powf(j - nu - 1.0);
    let numeric = tau.powf(nu) * q.integrate(f, tau, 2.0).value;
    let c = omega.tail_constant(j, nu);
    let log_branch = (j - nu).abs() < 1e-14;
    let (power_coefficient, tau_j_coefficient, closed_form) = if log_branch {
        (c, -1.0, c * tau.powf(nu) - tau.powf(j) * tau.ln())
    } else {
        let a = j - nu;
        (c + 1.0 / a, -1.0 / a, (c + 1.0 / a) * tau.powf(nu) - tau.powf(j) / a)
    };
    Ok(CutoffMoment { numeric, closed_form, tail_constant: c, power_coefficient, tau_j_coefficient, log_branch })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityResidual {
    pub max_deviation: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Scaling factors used by the kernel homogeneity check.
pub const SCALING_FACTORS: [f64; 2] = [2.0, 5.0];

/// `max |k(tau^d lambda, r, r') - tau^{mu+1} k(lambda, tau r, tau r')| / |k(tau^d lambda, r, r')|`
/// over the samples and `tau` in [`SCALING_FACTORS`].
pub fn twisted_homogeneity_residual<K>(kernel: K, mu: f64, d: i32, samples: &[(Complex64, f64, f64)]) -> HomogeneityResidual
where
    K: Fn(Complex64, f64, f64) -> Complex64,
{
    let mut out = HomogeneityResidual { max_deviation: 0.0, checked: 0, skipped: 0 };
    for &(lambda, r, rp) in samples {
        for tau in SCALING_FACTORS {
            let lhs = kernel(lambda * tau.powi(d), r, rp);
            if lhs.norm() == 0.0 || !lhs.is_finite() {
                out.skipped += 1;
                continue;
            }
            let rhs = kernel(lambda, tau * r, tau * rp) * tau.powf(mu + 1.0);
            out.max_deviation = out.max_deviation.max((lhs - rhs).norm() / lhs.norm());
            out.checked += 1;
        }
    }
    out
}
