//! Bessel functions of the first kind of real order and their zeros.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{ConeError, Result};
use crate::quadrature::GaussLegendre;

pub const MAX_ORDER: f64 = 500.0;
pub const MAX_ZERO_INDEX: usize = 100_000;
const SCAN_STEP: f64 = 2.5;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// `J_nu(x)` for `nu >= 0`, `x >= 0`, from the integral representation
///
/// `J_nu(x) = (1/pi) int_0^pi cos(nu t - x sin t) dt
///          - (sin(nu pi)/pi) int_0^inf exp(-x sinh t - nu t) dt`.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let gl = rule();
    let panels = ((nu + x) / 3.0).ceil() as usize + 1;
    let oscillatory = gl.integrate_panels(&mut |t: f64| (nu * t - x * t.sin()).cos(), 0.0, PI, panels) / PI;
    let s = (nu * PI).sin();
    if s.abs() < 1e-15 {
        return oscillatory;
    }
    let mut upper = (40.0 / x).asinh();
    if nu > 0.0 {
        upper = upper.min(40.0 / nu);
    }
    let panels = 8 + upper.ceil() as usize;
    let tail = gl.integrate_panels(&mut |t: f64| (-x * t.sinh() - nu * t).exp(), 0.0, upper, panels);
    oscillatory - s / PI * tail
}

/// `J_nu'(x) = (nu/x) J_nu(x) - J_{nu+1}(x)`.
pub fn bessel_j_prime(nu: f64, x: f64) -> f64 {
    nu / x * bessel_j(nu, x) - bessel_j(nu + 1.0, x)
}

fn check_order(nu: f64) -> Result<()> {
    if !(0.0..=MAX_ORDER).contains(&nu) {
        return Err(ConeError::Domain(format!("Bessel order {nu} outside [0, {MAX_ORDER}]")));
    }
    Ok(())
}

/// Refines the unique zero of `J_nu` in `[a, b]`, where `J_nu` changes sign.
fn refine(nu: f64, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = bessel_j(nu, a);
    if fa == 0.0 {
        return Ok(a);
    }
    while b - a > 0.4 {
        let mid = 0.5 * (a + b);
        let fm = bessel_j(nu, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..60 {
        let f = bessel_j(nu, x);
        let df = nu / x * f - bessel_j(nu + 1.0, x);
        if f == 0.0 {
            return Ok(x);
        }
        if (f > 0.0) == (fa > 0.0) {
            a = x;
        } else {
            b = x;
        }
        let mut next = x - f / df;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 2e-16 * x {
            return Ok(x);
        }
    }
    Err(ConeError::NoConvergence(format!(
        "Bessel zero of order {nu} in [{a}, {b}] did not converge (J = {:e})",
        bessel_j(nu, x)
    )))
}

/// All positive zeros of `J_nu` not exceeding `x_max`, ascending.
///
/// Consecutive zeros are more than 3.1 apart, so a scan step of 2.5 brackets
/// each one separately.
pub fn bessel_zeros_below(nu: f64, x_max: f64) -> Result<Vec<f64>> {
    check_order(nu)?;
    let mut zeros = Vec::new();
    // J_nu > 0 on (0, j_{nu,1}) and j_{nu,1} > max(nu, 2.4).
    let mut a = nu.max(0.5);
    let mut fa = bessel_j(nu, a);
    while a < x_max {
        let b = (a + SCAN_STEP).min(x_max);
        let fb = bessel_j(nu, b);
        if fb == 0.0 || (fb > 0.0) != (fa > 0.0) {
            zeros.push(refine(nu, a, b)?);
        }
        a = b;
        fa = fb;
        if zeros.len() > MAX_ZERO_INDEX {
            return Err(ConeError::Domain("more than 1e5 zeros requested".into()));
        }
    }
    Ok(zeros)
}

/// McMahon's large-`k` expansion of `j_{nu,k}`.
pub fn mcmahon(nu: f64, k: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let beta = (k as f64 + 0.5 * nu - 0.25) * PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
}

/// The `k`-th positive zero `j_{nu,k}` of `J_nu` (`k >= 1`).
pub fn bessel_zero(nu: f64, k: usize) -> Result<f64> {
    check_order(nu)?;
    if k == 0 || k > MAX_ZERO_INDEX {
        return Err(ConeError::Domain(format!("zero index {k} outside [1, {MAX_ZERO_INDEX}]")));
    }
    let beta = (k as f64 + 0.5 * nu - 0.25) * PI;
    if k > 20 && beta > 8.0 * (nu + 1.0) {
        let guess = mcmahon(nu, k);
        let (a, b) = (guess - 1.0, guess + 1.0);
        if (bessel_j(nu, a) > 0.0) != (bessel_j(nu, b) > 0.0) {
            return refine(nu, a, b);
        }
    }
    let mut upper = nu + 4.0 * k as f64 + 4.0;
    loop {
        let zeros = bessel_zeros_below(nu, upper)?;
        if zeros.len() >= k {
            return Ok(zeros[k - 1]);
        }
        upper *= 2.0;
    }
}
