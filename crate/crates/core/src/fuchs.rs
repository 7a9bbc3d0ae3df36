//! Fuchs-type operators `A = r^{-m} sum_k a_k(r) (-r d/dr)^k` in the
//! mode-diagonal representation, with their conormal, Mellin and
//! b-principal symbols.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};
use crate::poly::Poly;
use crate::series::{ModePolynomial, RadialSeries, DEFAULT_TRUNCATION};
use crate::spectral::CrossSection;

/// Which Laplacian sign convention an operator was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConvention {
    /// `Delta <= 0`; the cone Laplacian itself.
    Analyst,
    /// `-Delta >= 0`.
    Geometer,
}

impl fmt::Display for SignConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignConvention::Analyst => f.write_str("analyst"),
            SignConvention::Geometer => f.write_str("geometer"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuchsOperator {
    order: usize,
    coeffs: Vec<RadialSeries>,
    pub label: String,
    pub sign: Option<SignConvention>,
    /// Set when an operation discarded nonzero terms past the truncation order.
    pub truncated: bool,
}

/// The conormal symbol at one cross-section mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ConormalPolynomial {
    pub poly: Poly,
    pub mu: f64,
}

impl ConormalPolynomial {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.poly.eval(z)
    }
}

/// `h(r, z) = sum_k a_k(r) z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MellinSymbol {
    pub coeffs: Vec<RadialSeries>,
}

impl MellinSymbol {
    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, r: f64, z: Complex64, mu: f64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a.eval(r, mu))
    }

    /// The polynomial in `z` at fixed `(r, mu)`.
    pub fn poly_at(&self, r: f64, mu: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a.eval(r, mu)).collect())
    }
}

impl FuchsOperator {
    pub fn new(coeffs: Vec<RadialSeries>, label: impl Into<String>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(ConeError::InvalidOperator("no coefficients".into()));
        }
        let order = coeffs.len() - 1;
        if coeffs[order].is_zero() {
            return Err(ConeError::InvalidOperator(format!(
                "leading coefficient a_{order} vanishes identically"
            )));
        }
        let t = coeffs[0].truncation_order;
        if coeffs.iter().any(|c| c.truncation_order != t) {
            return Err(ConeError::InvalidOperator(
                "coefficients carry different truncation orders".into(),
            ));
        }
        Ok(FuchsOperator { order, coeffs, label: label.into(), sign: None, truncated: false })
    }

    pub fn with_sign(mut self, sign: SignConvention) -> Self {
        self.sign = Some(sign);
        self
    }

    /// The order-zero identity.
    pub fn identity(truncation_order: usize) -> Self {
        let one = RadialSeries::constant(ModePolynomial::constant(1.0), truncation_order);
        FuchsOperator::new(vec![one], "identity").expect("nonzero")
    }

    /// `r^{-1} (-r d/dr)`, the simplest first-order Fuchs operator.
    pub fn euler(truncation_order: usize) -> Self {
        let one = RadialSeries::constant(ModePolynomial::constant(1.0), truncation_order);
        FuchsOperator::new(vec![RadialSeries::zero(truncation_order), one], "euler")
            .expect("nonzero")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[RadialSeries] {
        &self.coeffs
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs[0].truncation_order
    }

    /// All coefficients independent of `r` (an exact cone).
    pub fn is_r_independent(&self) -> bool {
        self.coeffs.iter().all(RadialSeries::is_r_independent)
    }

    pub fn conormal(&self, mu: f64) -> ConormalPolynomial {
        ConormalPolynomial {
            poly: Poly::new(self.coeffs.iter().map(|a| a.at_zero().eval(mu)).collect()),
            mu,
        }
    }

    pub fn mellin_symbol(&self) -> MellinSymbol {
        MellinSymbol { coeffs: self.coeffs.clone() }
    }

    /// `sigma_{psi,b}(A)(r, rho, s)` for symbols depending on the cross-section
    /// covariable only through its length `s`.
    ///
    /// `(-r d/dr)` contributes `i rho` and `mu^j` contributes `s^{2j}`; a term
    /// `a_k` enters the principal part only through its `mu^{(m-k)/2}` coefficient.
    pub fn principal_symbol_b(&self, r: f64, rho: f64, s: f64) -> Result<Complex64> {
        let m = self.order;
        let mut total = Complex64::new(0.0, 0.0);
        let irho = Complex64::new(0.0, rho);
        for (k, a) in self.coeffs.iter().enumerate() {
            let transversal = m - k;
            for (p, mp) in a.coefficients.iter().enumerate() {
                let Some(deg) = mp.degree() else { continue };
                if 2 * deg > transversal {
                    return Err(ConeError::UnsupportedSymbol(format!(
                        "a_{k} has mu-degree {deg} (cross-section order {}), exceeding order {transversal}",
                        2 * deg
                    )));
                }
                if transversal % 2 == 1 || 2 * deg < transversal {
                    continue;
                }
                let lead = mp.0.coeff(deg);
                total += lead * r.powi(p as i32) * irho.powi(k as i32) * s.powi(transversal as i32);
            }
        }
        Ok(total)
    }

    /// The cone Laplacian of `dr^2 + r^2 g_X(r)` with `g_X(r)` conformal to a
    /// fixed metric: `a_2 = 1`, `a_1 = -n + 1 - r G'/G`, `a_0 = Delta_X`
    /// (eigenvalue `-mu / conformal^2`). The geometer convention flips every sign.
    pub fn cone_laplacian(
        cross_section: &CrossSection,
        g_profile: &RadialSeries,
        sign: SignConvention,
        conformal: f64,
    ) -> Result<Self> {
        let g0 = g_profile.at_zero().as_constant().ok_or_else(|| {
            ConeError::InvalidInput("G profile must be mode-independent".into())
        })?;
        if g0.norm() == 0.0 {
            return Err(ConeError::SingularMetric(g0.re));
        }
        if !(conformal.is_finite() && conformal > 0.0) {
            return Err(ConeError::InvalidInput(format!("conformal factor {conformal} must be positive")));
        }
        let t = g_profile.truncation_order;
        let n = cross_section.dim as f64;
        let log_deriv = g_profile.euler_derivative().div_scalar(g_profile)?;
        let a1 = RadialSeries::scalar(&[1.0 - n], t)?.add(&log_deriv.scale(Complex64::new(-1.0, 0.0)));
        let a0 = RadialSeries::constant(ModePolynomial::from_real(&[0.0, -1.0 / (conformal * conformal)]), t);
        let a2 = RadialSeries::scalar(&[1.0], t)?;
        let s = match sign {
            SignConvention::Analyst => Complex64::new(1.0, 0.0),
            SignConvention::Geometer => Complex64::new(-1.0, 0.0),
        };
        let label = format!("cone_laplacian_{sign}_n{}", cross_section.dim);
        Ok(FuchsOperator::new(vec![a0.scale(s), a1.scale(s), a2.scale(s)], label)?.with_sign(sign))
    }

    /// Flat cone Laplacian (`G` constant, no conformal factor).
    pub fn flat_cone_laplacian(cross_section: &CrossSection, sign: SignConvention) -> Self {
        let g = RadialSeries::scalar(&[1.0], DEFAULT_TRUNCATION).expect("one coefficient");
        Self::cone_laplacian(cross_section, &g, sign, 1.0).expect("flat profile is regular")
    }

    /// `self + other`; orders may differ.
    pub fn add(&self, other: &FuchsOperator) -> Result<FuchsOperator> {
        if self.truncation_order() != other.truncation_order() {
            return Err(ConeError::Incompatible("truncation orders differ".into()));
        }
        if self.order != other.order {
            return Err(ConeError::Incompatible(
                "sums of Fuchs operators of different order need a reweighting by r; not supported".into(),
            ));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        let mut out = FuchsOperator::new(coeffs, format!("{}+{}", self.label, other.label))?;
        out.truncated = self.truncated || other.truncated;
        Ok(out)
    }

    /// `outer ∘ inner`, using `(-r d/dr)^k r^{p-m1} = r^{p-m1} (-r d/dr + m1 - p)^k`.
    pub fn compose(outer: &FuchsOperator, inner: &FuchsOperator) -> Result<FuchsOperator> {
        let order_t = outer.truncation_order();
        if inner.truncation_order() != order_t {
            return Err(ConeError::Incompatible(format!(
                "truncation orders differ: {} vs {}",
                order_t,
                inner.truncation_order()
            )));
        }
        let m1 = inner.order;
        let m = outer.order + inner.order;
        let mut out = vec![vec![ModePolynomial::zero(); order_t + 1]; m + 1];
        let mut dropped = false;

        for p in 0..=order_t {
            // Nothing in `inner` at this power of r.
            if inner.coeffs.iter().all(|a| a.coeff(p).is_zero()) {
                continue;
            }
            let shift = Complex64::new(m1 as f64 - p as f64, 0.0);
            let base = Poly::new(vec![shift, Complex64::new(1.0, 0.0)]);
            let mut power = Poly::constant(Complex64::new(1.0, 0.0));
            for (k, b) in outer.coeffs.iter().enumerate() {
                if k > 0 {
                    power = power.mul(&base);
                }
                for (q, bq) in b.coefficients.iter().enumerate() {
                    if bq.is_zero() {
                        continue;
                    }
                    for (j, a) in inner.coeffs.iter().enumerate() {
                        let ap = a.coeff(p);
                        if ap.is_zero() {
                            continue;
                        }
                        if p + q > order_t {
                            dropped = true;
                            continue;
                        }
                        let prod = bq.mul(&ap);
                        for (i, &c) in power.coeffs.iter().enumerate() {
                            if c == Complex64::new(0.0, 0.0) {
                                continue;
                            }
                            out[i + j][p + q] = out[i + j][p + q].add(&prod.scale(c));
                        }
                    }
                }
            }
        }
        let coeffs = out
            .into_iter()
            .map(|c| RadialSeries::new(c, order_t))
            .collect::<Result<Vec<_>>>()?;
        let mut result = FuchsOperator::new(coeffs, format!("{}*{}", outer.label, inner.label))?;
        result.truncated = dropped || outer.truncated || inner.truncated;
        Ok(result)
    }

    pub fn to_document(&self) -> OperatorDocument {
        OperatorDocument {
            order: self.order,
            coefficients: self
                .coeffs
                .iter()
                .map(|a| {
                    a.coefficients
                        .iter()
                        .map(|mp| mp.0.coeffs.iter().map(|&c| JsonScalar::from(c)).collect())
                        .collect()
                })
                .collect(),
            label: self.label.clone(),
            sign: self.sign,
            truncation_order: Some(self.truncation_order()),
        }
    }

    pub fn from_document(doc: &OperatorDocument) -> Result<Self> {
        if doc.coefficients.len() != doc.order + 1 {
            return Err(ConeError::InvalidOperator(format!(
                "order {} needs {} coefficient series, found {}",
                doc.order,
                doc.order + 1,
                doc.coefficients.len()
            )));
        }
        let t = doc.truncation_order.unwrap_or(DEFAULT_TRUNCATION);
        let coeffs = doc
            .coefficients
            .iter()
            .map(|series| {
                let polys = series
                    .iter()
                    .map(|mp| ModePolynomial(Poly::new(mp.iter().map(|&s| s.into()).collect())))
                    .collect();
                RadialSeries::new(polys, t)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut op = FuchsOperator::new(coeffs, doc.label.clone())?;
        op.sign = doc.sign;
        Ok(op)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: OperatorDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk operator: `coefficients[k][p]` lists the `mu`-polynomial
/// coefficients of the `r^p` term of `a_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDocument {
    pub order: usize,
    pub coefficients: Vec<Vec<Vec<JsonScalar>>>,
    pub label: String,
    #[serde(default)]
    pub sign: Option<SignConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_order: Option<usize>,
}

/// A real number, or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Complex64> for JsonScalar {
    fn from(c: Complex64) -> Self {
        if c.im == 0.0 {
            JsonScalar::Real(c.re)
        } else {
            JsonScalar::Complex([c.re, c.im])
        }
    }
}

impl From<JsonScalar> for Complex64 {
    fn from(s: JsonScalar) -> Self {
        match s {
            JsonScalar::Real(x) => Complex64::new(x, 0.0),
            JsonScalar::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}
