//! Gauss–Legendre rules and adaptive bisection quadrature.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Values that can be integrated: a vector space over `f64` with a size.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl Integrand for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate<T: Integrand>(&self, f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn integrate_panels<T: Integrand>(
        &self,
        f: &mut impl FnMut(f64) -> T,
        a: f64,
        b: f64,
        panels: usize,
    ) -> T {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = T::zero();
        for k in 0..panels {
            let lo = a + h * k as f64;
            acc = acc + self.integrate(f, lo, lo + h);
        }
        acc
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive bisection: a panel is accepted when the one-panel and two-panel
/// Gauss–Legendre values agree within its share of the tolerance.
pub struct Adaptive {
    rule: GaussLegendre,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: usize,
    /// Cap on accepted panels; past it every panel is accepted as is and the
    /// result is flagged unconverged.
    pub max_panels: usize,
}

impl Adaptive {
    pub fn new(order: usize, abs_tol: f64, rel_tol: f64) -> Self {
        Adaptive { rule: GaussLegendre::new(order), abs_tol, rel_tol, max_depth: 40, max_panels: 1 << 14 }
    }

    pub fn integrate<T: Integrand>(&self, mut f: impl FnMut(f64) -> T, a: f64, b: f64) -> Quadrature<T> {
        let whole = self.rule.integrate(&mut f, a, b);
        let scale = whole.magnitude();
        let tol = self.abs_tol.max(self.rel_tol * scale);
        let mut out = Quadrature { value: T::zero(), error: 0.0, converged: true };
        let mut panels = 0;
        self.recurse(&mut f, a, b, whole, tol, 0, &mut panels, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<T: Integrand>(
        &self,
        f: &mut impl FnMut(f64) -> T,
        a: f64,
        b: f64,
        coarse: T,
        tol: f64,
        depth: usize,
        panels: &mut usize,
        out: &mut Quadrature<T>,
    ) {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(f, a, mid);
        let right = self.rule.integrate(f, mid, b);
        let fine = left + right;
        let err = (fine - coarse).magnitude();
        let exhausted = *panels >= self.max_panels;
        if err <= tol || exhausted || depth >= self.max_depth || (b - a).abs() < 1e-14 * (a.abs() + b.abs()) {
            if err > tol {
                out.converged = false;
            }
            out.value = out.value + fine;
            out.error += err;
            *panels += 1;
            return;
        }
        self.recurse(f, a, mid, left, 0.5 * tol, depth + 1, panels, out);
        self.recurse(f, mid, b, right, 0.5 * tol, depth + 1, panels, out);
    }
}
