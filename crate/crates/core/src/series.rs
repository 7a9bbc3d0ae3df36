//! Truncated power series in `r` whose coefficients are polynomials in the
//! cross-section eigenvalue `mu`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::poly::Poly;

pub const DEFAULT_TRUNCATION: usize = 16;

/// Polynomial in the eigenvalue `mu` of `-Delta_X`, i.e. a cross-section
/// operator acting diagonally on the eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModePolynomial(pub Poly);

impl ModePolynomial {
    pub fn zero() -> Self {
        ModePolynomial(Poly::zero())
    }

    pub fn constant(c: f64) -> Self {
        ModePolynomial(Poly::from_real(&[c]))
    }

    pub fn complex_constant(c: Complex64) -> Self {
        ModePolynomial(Poly::constant(c))
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        ModePolynomial(Poly::from_real(coeffs))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Degree in `mu`, `None` for zero.
    pub fn degree(&self) -> Option<usize> {
        self.0.degree()
    }

    pub fn eval(&self, mu: f64) -> Complex64 {
        self.0.eval(Complex64::new(mu, 0.0))
    }

    pub fn add(&self, o: &Self) -> Self {
        ModePolynomial(self.0.add(&o.0))
    }

    pub fn mul(&self, o: &Self) -> Self {
        ModePolynomial(self.0.mul(&o.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        ModePolynomial(self.0.scale(s))
    }

    /// `mu`-independent part, if the polynomial is constant.
    pub fn as_constant(&self) -> Option<Complex64> {
        match self.degree() {
            None => Some(Complex64::new(0.0, 0.0)),
            Some(0) => Some(self.0.coeffs[0]),
            _ => None,
        }
    }
}

/// `sum_p coefficients[p] r^p`, truncated after `r^truncation_order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSeries {
    pub coefficients: Vec<ModePolynomial>,
    pub truncation_order: usize,
}

impl RadialSeries {
    pub fn new(mut coefficients: Vec<ModePolynomial>, truncation_order: usize) -> Result<Self> {
        while matches!(coefficients.last(), Some(c) if c.is_zero()) {
            coefficients.pop();
        }
        if coefficients.len() > truncation_order + 1 {
            return Err(ConeError::InvalidInput(format!(
                "{} series coefficients exceed truncation order {}",
                coefficients.len(),
                truncation_order
            )));
        }
        Ok(RadialSeries { coefficients, truncation_order })
    }

    pub fn zero(truncation_order: usize) -> Self {
        RadialSeries { coefficients: Vec::new(), truncation_order }
    }

    pub fn constant(m: ModePolynomial, truncation_order: usize) -> Self {
        RadialSeries::new(vec![m], truncation_order).expect("single coefficient always fits")
    }

    /// Scalar (mode-independent) series from real Taylor coefficients.
    pub fn scalar(coeffs: &[f64], truncation_order: usize) -> Result<Self> {
        Self::new(
            coeffs.iter().map(|&c| ModePolynomial::constant(c)).collect(),
            truncation_order,
        )
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coeff(&self, p: usize) -> ModePolynomial {
        self.coefficients.get(p).cloned().unwrap_or_else(ModePolynomial::zero)
    }

    pub fn at_zero(&self) -> ModePolynomial {
        self.coeff(0)
    }

    /// True when no power of `r` beyond the constant term is present.
    pub fn is_r_independent(&self) -> bool {
        self.coefficients.len() <= 1
    }

    pub fn eval(&self, r: f64, mu: f64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * r + c.eval(mu))
    }

    pub fn add(&self, o: &Self) -> Self {
        let order = self.truncation_order.min(o.truncation_order);
        let n = self.coefficients.len().max(o.coefficients.len()).min(order + 1);
        let coeffs = (0..n).map(|p| self.coeff(p).add(&o.coeff(p))).collect();
        RadialSeries::new(coeffs, order).expect("length bounded by truncation")
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let coeffs = self.coefficients.iter().map(|c| c.scale(s)).collect();
        RadialSeries::new(coeffs, self.truncation_order).expect("same length")
    }

    /// Product truncated at the common order. The flag reports whether any
    /// nonzero term was discarded.
    pub fn mul(&self, o: &Self) -> (Self, bool) {
        let order = self.truncation_order.min(o.truncation_order);
        let mut out = vec![ModePolynomial::zero(); order + 1];
        let mut dropped = false;
        for (i, a) in self.coefficients.iter().enumerate() {
            for (j, b) in o.coefficients.iter().enumerate() {
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                if i + j > order {
                    dropped = true;
                    continue;
                }
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        (RadialSeries::new(out, order).expect("length bounded"), dropped)
    }

    /// Multiplication by `r^shift`, dropping terms past the truncation order.
    pub fn shift_up(&self, shift: usize) -> (Self, bool) {
        let mut coeffs = vec![ModePolynomial::zero(); shift];
        coeffs.extend(self.coefficients.iter().cloned());
        let dropped = coeffs.len() > self.truncation_order + 1
            && coeffs[self.truncation_order + 1..].iter().any(|c| !c.is_zero());
        coeffs.truncate(self.truncation_order + 1);
        (RadialSeries::new(coeffs, self.truncation_order).expect("truncated"), dropped)
    }

    /// `r d/dr` applied termwise.
    pub fn euler_derivative(&self) -> Self {
        let coeffs = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(p, c)| c.scale(Complex64::new(p as f64, 0.0)))
            .collect();
        RadialSeries::new(coeffs, self.truncation_order).expect("same length")
    }

    /// Quotient of two scalar series, `self / den`, to the truncation order.
    /// Requires `den(0) != 0` and both series mode-independent.
    pub fn div_scalar(&self, den: &Self) -> Result<Self> {
        let order = self.truncation_order.min(den.truncation_order);
        let num: Vec<Complex64> = (0..=order)
            .map(|p| scalar_coeff(&self.coeff(p)))
            .collect::<Result<_>>()?;
        let d: Vec<Complex64> = (0..=order)
            .map(|p| scalar_coeff(&den.coeff(p)))
            .collect::<Result<_>>()?;
        if d[0].norm() == 0.0 {
            return Err(ConeError::Domain("series division by a series vanishing at r = 0".into()));
        }
        let mut q = vec![Complex64::new(0.0, 0.0); order + 1];
        for p in 0..=order {
            let mut acc = num[p];
            for k in 1..=p {
                acc -= d[k] * q[p - k];
            }
            q[p] = acc / d[0];
        }
        RadialSeries::new(q.into_iter().map(ModePolynomial::complex_constant).collect(), order)
    }
}

fn scalar_coeff(m: &ModePolynomial) -> Result<Complex64> {
    m.as_constant()
        .ok_or_else(|| ConeError::InvalidInput("expected a mode-independent series".into()))
}
