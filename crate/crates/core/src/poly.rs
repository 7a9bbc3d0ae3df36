//! Dense complex polynomials in one variable, ascending coefficient order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ConeError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `coeffs[k]` multiplies `z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
}

/// A root together with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub z: Complex64,
    pub multiplicity: usize,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// Drops exact trailing zeros; the zero polynomial has no coefficients.
    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(c) if *c == ZERO) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// `q(z) = p(z + a)`, by Horner composition.
    pub fn shift(&self, a: Complex64) -> Poly {
        let lin = Poly { coeffs: vec![a, ONE] };
        self.coeffs
            .iter()
            .rev()
            .fold(Poly::zero(), |acc, &c| acc.mul(&lin).add(&Poly::constant(c)))
    }

    /// Largest coefficient modulus, used for relative comparisons.
    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Roots with algebraic multiplicities.
    ///
    /// Companion-matrix eigenvalues are clustered (multiplicity via the derivative
    /// test at `mult_tol`) and each cluster centre is Newton-polished on the
    /// `(k-1)`-th derivative, where `k` is the cluster size.
    pub fn roots(&self, mult_tol: f64) -> Result<Vec<Root>> {
        let deg = match self.degree() {
            None => {
                return Err(ConeError::InvalidInput(
                    "roots of the zero polynomial".into(),
                ))
            }
            Some(0) => return Ok(Vec::new()),
            Some(d) => d,
        };
        let lead = self.coeffs[deg];
        let raw: Vec<Complex64> = if deg == 1 {
            vec![-self.coeffs[0] / lead]
        } else {
            let mut comp = DMatrix::<Complex64>::zeros(deg, deg);
            for i in 1..deg {
                comp[(i, i - 1)] = ONE;
            }
            for i in 0..deg {
                comp[(i, deg - 1)] = -self.coeffs[i] / lead;
            }
            let schur = nalgebra::Schur::new(comp);
            let (_, t) = schur.unpack();
            (0..deg).map(|i| t[(i, i)]).collect()
        };

        let raw: Vec<Complex64> = raw.into_iter().map(|z| self.newton(z, 50)).collect();

        // Cluster nearby eigenvalues: a k-fold root splits into a k-cycle of
        // radius ~ eps^(1/k) around the true root.
        let scale = 1.0 + raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let cluster_radius = 1e-5 * scale;
        let mut used = vec![false; raw.len()];
        let mut roots = Vec::new();
        for i in 0..raw.len() {
            if used[i] {
                continue;
            }
            let mut members = vec![raw[i]];
            used[i] = true;
            for j in (i + 1)..raw.len() {
                if !used[j] && (raw[j] - raw[i]).norm() < cluster_radius {
                    used[j] = true;
                    members.push(raw[j]);
                }
            }
            let centre = members.iter().sum::<Complex64>() / members.len() as f64;
            let k = self.multiplicity_at(centre, members.len(), mult_tol);
            let polished = if k > 1 {
                let mut d = self.clone();
                for _ in 0..(k - 1) {
                    d = d.derivative();
                }
                d.newton(centre, 50)
            } else {
                self.newton(centre, 50)
            };
            roots.push(Root { z: polished, multiplicity: k });
        }
        let total: usize = roots.iter().map(|r| r.multiplicity).sum();
        if total != deg {
            return Err(ConeError::NoConvergence(format!(
                "root multiplicities sum to {total}, degree is {deg}"
            )));
        }
        Ok(roots)
    }

    /// Largest `k <= cap` such that `p, p', ..., p^(k-1)` all vanish at `z`
    /// relative to the coefficient scale.
    fn multiplicity_at(&self, z: Complex64, cap: usize, tol: f64) -> usize {
        let mut d = self.clone();
        let mut k = 0;
        while k < cap {
            let scale = d.norm_inf().max(f64::MIN_POSITIVE) * (1.0 + z.norm()).powi(d.coeffs.len() as i32);
            if d.eval(z).norm() > tol * scale {
                break;
            }
            k += 1;
            d = d.derivative();
        }
        k.max(1)
    }

    fn newton(&self, mut z: Complex64, iters: usize) -> Complex64 {
        let d = self.derivative();
        for _ in 0..iters {
            let dp = d.eval(z);
            if dp.norm() == 0.0 {
                break;
            }
            let step = self.eval(z) / dp;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            let next = z - step;
            // Accept only improving steps.
            if self.eval(next).norm() > self.eval(z).norm() {
                break;
            }
            z = next;
            if step.norm() <= 1e-16 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    }
}
