//! Mellin transform and Mellin quantization on uniform grids in `s = log r`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::fuchs::{FuchsOperator, MellinSymbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Consecutive `Im z` nodes at the roundoff floor that end the contour integral.
const QUIET_RUN: usize = 24;
/// Samples at the grid ends must be below this for the support check.
pub const SUPPORT_TOL: f64 = 1e-12;

/// `r_i = exp(s_i)`, `s_i` uniform on `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub count: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        LogGrid::new(1e-6, 1e2, 2048).expect("valid default grid")
    }
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) {
            return Err(ConeError::InvalidInput(format!("log-grid needs 0 < r_min < r_max, got [{r_min}, {r_max}]")));
        }
        if count < 16 {
            return Err(ConeError::InvalidInput(format!("log-grid needs at least 16 nodes, got {count}")));
        }
        Ok(LogGrid { s_min: r_min.ln(), s_max: r_max.ln(), count })
    }

    pub fn step(&self) -> f64 {
        (self.s_max - self.s_min) / (self.count - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        self.s_min + self.step() * i as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        self.s(i).exp()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.r(i)).collect()
    }

    /// Largest `|Im z|` resolved by the grid.
    pub fn nyquist(&self) -> f64 {
        PI / self.step()
    }
}

/// Complex samples on a [`LogGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    pub grid: LogGrid,
    pub values: Vec<Complex64>,
}

impl RadialFunction {
    pub fn new(grid: LogGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.count {
            return Err(ConeError::InvalidInput(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.count
            )));
        }
        Ok(RadialFunction { grid, values })
    }

    pub fn zeros(grid: LogGrid) -> Self {
        RadialFunction { grid, values: vec![ZERO; grid.count] }
    }

    pub fn from_fn(grid: LogGrid, f: impl Fn(f64) -> Complex64) -> Self {
        RadialFunction { grid, values: (0..grid.count).map(|i| f(grid.r(i))).collect() }
    }

    pub fn from_real_fn(grid: LogGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    /// Both end samples are below [`SUPPORT_TOL`].
    pub fn support_ok(&self) -> bool {
        self.values[0].norm() < SUPPORT_TOL && self.values[self.grid.count - 1].norm() < SUPPORT_TOL
    }

    pub fn max_abs_diff(&self, other: &RadialFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "value_re", "value_im"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                format!("{:.16e}", self.grid.r(i)),
                format!("{:.16e}", v.re),
                format!("{:.16e}", v.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `r, value_re[, value_im]`; the `r` column must be log-uniform.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = crate::open_csv(path)?;
        let mut rs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| ConeError::InvalidInput(format!("missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| ConeError::InvalidInput(format!("bad number: {e}")))
            };
            rs.push(field(0)?);
            let im = if rec.len() > 2 { field(2)? } else { 0.0 };
            values.push(Complex64::new(field(1)?, im));
        }
        if rs.len() < 16 {
            return Err(ConeError::InvalidInput("radial function needs at least 16 rows".into()));
        }
        let grid = LogGrid::new(rs[0], rs[rs.len() - 1], rs.len())?;
        for (i, &r) in rs.iter().enumerate() {
            if ((r.ln() - grid.s(i)) / grid.step()).abs() > 1e-6 {
                return Err(ConeError::InvalidInput(format!("row {i}: r = {r} is off the log-uniform grid")));
            }
        }
        RadialFunction::new(grid, values)
    }
}

/// Mellin transform value with an estimate of the error from cutting the
/// integral at the grid ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinValue {
    pub value: Complex64,
    pub truncation_estimate: f64,
    pub support_ok: bool,
}

/// `int_0^inf r^{z-1} u(r) dr`, trapezoid rule in `s = log r`.
pub fn mellin_transform(u: &RadialFunction, z: Complex64) -> MellinValue {
    let g = &u.grid;
    let h = g.step();
    let n = g.count;
    let mut acc = ZERO;
    for (i, v) in u.values.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        acc += (z * g.s(i)).exp() * v * w;
    }
    let end = |i: usize| ((z * g.s(i)).exp() * u.values[i]).norm();
    MellinValue { value: acc, truncation_estimate: end(0) + end(n - 1), support_ok: u.support_ok() }
}

/// Settings for the contour integral along `Re z = beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSettings {
    /// Initial truncation `|Im z| <= t0`, doubled adaptively.
    pub t0: f64,
    /// Stop once the last octave contributes below this fraction.
    pub octave_tol: f64,
    /// Fail if the last octave still exceeds this at the grid's resolution limit.
    pub tail_tol: f64,
    /// Integrate exactly `|Im z| <= T` with no adaptive stopping, making the
    /// result an input-independent linear map.
    pub fixed_cutoff: Option<f64>,
}

impl Default for ContourSettings {
    fn default() -> Self {
        ContourSettings { t0: 16.0, octave_tol: 1e-12, tail_tol: 1e-7, fixed_cutoff: None }
    }
}

/// `(1/2 pi i) int_{Re z = beta} r^{-z-m} h(r, z) (M u)(z) dz` at mode `mu`.
///
/// The `Im z` step is `2 pi / (2 L)` with `L` the grid length in `s`, so
/// aliased copies of the output lie outside the grid.
pub fn op_mellin_apply(
    h: &MellinSymbol,
    mu: f64,
    m: i32,
    u: &RadialFunction,
    beta: f64,
    settings: &ContourSettings,
) -> Result<RadialFunction> {
    let g = u.grid;
    let n = g.count;
    let hs = g.step();
    let length = g.s_max - g.s_min + hs;
    let dy = PI / length;

    // r^{-m} a_k(r) at every node, and trapezoid weights for M u.
    let coeffs: Vec<Vec<Complex64>> = h
        .coeffs
        .iter()
        .map(|a| (0..n).map(|i| a.eval(g.r(i), mu) * (-(m as f64) * g.s(i)).exp()).collect())
        .collect();
    let weights: Vec<Complex64> = (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 { 0.5 * hs } else { hs };
            u.values[i] * (beta * g.s(i)).exp() * w
        })
        .collect();
    let damp: Vec<f64> = (0..n).map(|i| (-beta * g.s(i)).exp()).collect();

    let degree = h.order() as i32;
    let mut out = vec![ZERO; n];
    // Adds one node of the y-quadrature; returns |(M u)(z)| (1 + |z|)^deg.
    let add_line = |y: f64, out: &mut [Complex64]| {
        let z = Complex64::new(beta, y);
        // (M u)(z) = sum_i w_i e^{i y s_i}
        let phases: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, y * g.s(i))).collect();
        let terms: Vec<Complex64> = weights.iter().zip(&phases).map(|(w, p)| w * p).collect();
        let mu_z = pairwise_sum(&terms);
        let scale = mu_z * (dy / (2.0 * PI));
        for i in 0..n {
            let hz = coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c[i]);
            out[i] += hz * phases[i].conj() * damp[i] * scale;
        }
        (mu_z.norm(), mu_z.norm() * (1.0 + z.norm()).powi(degree))
    };
    // |M u| below this is summation roundoff, not signal.
    let noise_floor = 64.0 * f64::EPSILON * weights.iter().map(|w| w.norm()).sum::<f64>();

    let mut running = add_line(0.0, &mut out).1;
    let nyquist = g.nyquist();
    if let Some(cutoff) = settings.fixed_cutoff {
        let mut k = 1usize;
        while (k as f64) * dy <= cutoff.min(nyquist) {
            add_line(k as f64 * dy, &mut out);
            add_line(-(k as f64) * dy, &mut out);
            k += 1;
        }
        return RadialFunction::new(g, out);
    }
    let mut k = 1usize;
    let mut quiet = 0usize;
    let mut t = settings.t0.min(nyquist);
    loop {
        let mut octave = 0.0;
        while (k as f64) * dy <= t && quiet < QUIET_RUN {
            let y = k as f64 * dy;
            let mut loud = false;
            for (m_abs, weighted) in [add_line(y, &mut out), add_line(-y, &mut out)] {
                octave += weighted;
                loud |= m_abs > noise_floor;
            }
            quiet = if loud { 0 } else { quiet + 1 };
            k += 1;
        }
        running += octave;
        let rel = if running > 0.0 { octave / running } else { 0.0 };
        // Past the noise floor further nodes only add amplified roundoff.
        if rel < settings.octave_tol || quiet >= QUIET_RUN {
            break;
        }
        if t >= nyquist {
            if rel > settings.tail_tol {
                return Err(ConeError::ContourTruncation { tail: rel, tol: settings.tail_tol });
            }
            break;
        }
        t = (2.0 * t).min(nyquist);
    }
    RadialFunction::new(g, out)
}

fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Applies `A` at mode `mu` via [`op_mellin_apply`] with its Mellin symbol.
pub fn apply_operator_mellin(
    a: &FuchsOperator,
    mu: f64,
    u: &RadialFunction,
    beta: f64,
    settings: &ContourSettings,
) -> Result<RadialFunction> {
    op_mellin_apply(&a.mellin_symbol(), mu, a.order() as i32, u, beta, settings)
}

/// Eighth-order central difference weights for the first derivative.
const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];

/// `-du/ds` on the grid with zero extension past the ends.
fn euler_derivative(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    let at = |i: isize| if i < 0 || i >= n as isize { ZERO } else { v[i as usize] };
    (0..n as isize)
        .map(|i| {
            let d: Complex64 = D1
                .iter()
                .enumerate()
                .map(|(k, w)| (at(i + k as isize + 1) - at(i - k as isize - 1)) * *w)
                .sum();
            -d / h
        })
        .collect()
}

/// Direct action `r^{-m} sum_k a_k(r) (-r d/dr)^k u` with finite differences in `s`.
pub fn direct_apply(a: &FuchsOperator, mu: f64, u: &RadialFunction) -> RadialFunction {
    let g = u.grid;
    let h = g.step();
    let mut out = vec![ZERO; g.count];
    let mut deriv = u.values.clone();
    for (k, coeff) in a.coeffs().iter().enumerate() {
        if k > 0 {
            deriv = euler_derivative(&deriv, h);
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += coeff.eval(g.r(i), mu) * deriv[i];
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o *= (-(a.order() as f64) * g.s(i)).exp();
    }
    RadialFunction { grid: g, values: out }
}

/// `exp(1 - 1/(1 - x^2))` for `x = (s - center)/half_width`, zero for `|x| >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
}

impl Bump {
    /// Bump in `s = log r` supported on `[r_lo, r_hi]`.
    pub fn on_interval(r_lo: f64, r_hi: f64) -> Self {
        let (a, b) = (r_lo.ln(), r_hi.ln());
        Bump { center: 0.5 * (a + b), half_width: 0.5 * (b - a) }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.derivatives(s, 0)[0]
    }

    /// `d^k/ds^k` of the bump for `k = 0..=order`, from Taylor jets.
    pub fn derivatives(&self, s: f64, order: usize) -> Vec<f64> {
        let x = (s - self.center) / self.half_width;
        if x.abs() >= 1.0 {
            return vec![0.0; order + 1];
        }
        let len = order + 1;
        // q(t) = 1 - (x + t)^2
        let mut q = vec![0.0; len];
        q[0] = 1.0 - x * x;
        if len > 1 {
            q[1] = -2.0 * x;
        }
        if len > 2 {
            q[2] = -1.0;
        }
        let inv = jet_reciprocal(&q);
        let mut g: Vec<f64> = inv.iter().map(|c| -c).collect();
        g[0] += 1.0;
        let e = jet_exp(&g);
        let mut factorial = 1.0;
        let mut scale = 1.0;
        e.iter()
            .enumerate()
            .map(|(k, c)| {
                if k > 0 {
                    factorial *= k as f64;
                    scale /= self.half_width;
                }
                c * factorial * scale
            })
            .collect()
    }

    pub fn radial(&self, grid: LogGrid) -> RadialFunction {
        RadialFunction::from_real_fn(grid, |r| self.value(r.ln()))
    }
}

fn jet_reciprocal(q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    for k in 0..q.len() {
        let mut acc = if k == 0 { 1.0 } else { 0.0 };
        for j in 1..=k {
            acc -= q[j] * out[k - j];
        }
        out[k] = acc / q[0];
    }
    out
}

fn jet_exp(g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    out[0] = g[0].exp();
    for k in 1..g.len() {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * g[j] * out[k - j];
        }
        out[k] = acc / k as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuchs::SignConvention;
    use crate::quadrature::Adaptive;
    use crate::spectral::CrossSection;

    #[test]
    fn gamma_two_from_exponential() {
        let grid = LogGrid::default();
        let u = RadialFunction::from_real_fn(grid, |r| if r <= 40.0 { (-r).exp() } else { 0.0 });
        let v = mellin_transform(&u, Complex64::new(2.0, 0.0));
        assert!((v.value - 1.0).norm() < 1e-8, "{}", v.value);
        assert!(!v.support_ok);
        assert!(v.truncation_estimate < 1e-10);
    }

    #[test]
    fn zero_function() {
        let u = RadialFunction::zeros(LogGrid::default());
        assert_eq!(mellin_transform(&u, Complex64::new(0.3, 2.0)).value, ZERO);
    }

    #[test]
    fn bump_integral_matches_direct_quadrature() {
        let bump = Bump::on_interval(1.0, 2.0);
        let grid = LogGrid::new(1e-6, 1e2, 8192).unwrap();
        let v = mellin_transform(&bump.radial(grid), Complex64::new(1.0, 0.0));
        let direct = Adaptive::new(20, 1e-15, 1e-14).integrate(|r: f64| bump.value(r.ln()), 1.0, 2.0);
        assert!(v.support_ok);
        assert!((v.value.re - direct.value).abs() < 1e-10, "{} vs {}", v.value.re, direct.value);
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump { center: 0.3, half_width: 1.7 };
        let s = 0.9;
        let d = b.derivatives(s, 2);
        let eps = 1e-5;
        let fd = (b.value(s + eps) - b.value(s - eps)) / (2.0 * eps);
        assert!((d[1] - fd).abs() < 1e-8);
        let fd2 = (b.value(s + eps) - 2.0 * b.value(s) + b.value(s - eps)) / (eps * eps);
        assert!((d[2] - fd2).abs() < 1e-4);
    }

    fn wide_bump_grid() -> (Bump, LogGrid) {
        (Bump { center: 0.8, half_width: 2.0 }, LogGrid::new(0.1, 100.0, 2048).unwrap())
    }

    #[test]
    fn identity_symbol_inverts_transform() {
        let (b, grid) = wide_bump_grid();
        let u = b.radial(grid);
        let id = FuchsOperator::identity(16);
        let out = apply_operator_mellin(&id, 0.0, &u, 0.0, &ContourSettings::default()).unwrap();
        assert!(out.max_abs_diff(&u) < 1e-8);
    }

    #[test]
    fn euler_symbol_is_minus_r_derivative() {
        let (b, grid) = wide_bump_grid();
        let u = b.radial(grid);
        let euler = FuchsOperator::euler(16);
        // r^{-1}(-r d/dr) has symbol z with m = 1; undo the r^{-1}.
        let out = op_mellin_apply(&euler.mellin_symbol(), 0.0, 0, &u, 0.5, &ContourSettings::default()).unwrap();
        let expected = RadialFunction::from_real_fn(grid, |r| -b.derivatives(r.ln(), 1)[1]);
        assert!(out.max_abs_diff(&expected) < 1e-6);
    }

    #[test]
    fn laplacian_mode_matches_direct_action() {
        let (b, grid) = wide_bump_grid();
        let u = b.radial(grid);
        let cs = CrossSection::circle(1.0).unwrap();
        let a = FuchsOperator::flat_cone_laplacian(&cs, SignConvention::Analyst);
        let mu = 4.0;
        let out = apply_operator_mellin(&a, mu, &u, 0.0, &ContourSettings::default()).unwrap();
        let exact = RadialFunction::from_real_fn(grid, |r| {
            let d = b.derivatives(r.ln(), 2);
            (d[2] - mu * d[0]) / (r * r)
        });
        let scale = exact.sup_norm();
        assert!(out.max_abs_diff(&exact) <= 1e-6 * scale.max(1.0));
        let fd = direct_apply(&a, mu, &u);
        assert!(fd.max_abs_diff(&exact) <= 1e-6 * scale.max(1.0));
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("conetrace-mellin-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("u.csv");
        let (b, _) = wide_bump_grid();
        let u = b.radial(LogGrid::new(1e-3, 10.0, 64).unwrap());
        u.write_csv(&path).unwrap();
        let back = RadialFunction::read_csv(&path).unwrap();
        assert!(back.max_abs_diff(&u) < 1e-15);
        std::fs::remove_dir_all(&dir).ok();
    }
}
