//! Eigenvalues of real symmetric tridiagonal matrices by Sturm bisection.

/// Number of eigenvalues strictly below `x` for the matrix with diagonal `d`
/// and off-diagonal `e` (`e.len() == d.len() - 1`).
pub fn count_below(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q.abs() < tiny { tiny.copysign(q) } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin interval containing the spectrum.
pub fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d.len() {
        let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < d.len() { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - left - right);
        hi = hi.max(d[i] + left + right);
    }
    (lo, hi)
}

/// The `k`-th smallest eigenvalue (0-based), bisected to `rel_tol` of the
/// spectral radius.
pub fn kth_eigenvalue(d: &[f64], e: &[f64], k: usize, rel_tol: f64) -> f64 {
    assert!(k < d.len(), "eigenvalue index out of range");
    let (mut lo, mut hi) = gershgorin(d, e);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    while hi - lo > rel_tol * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `k`-th smallest eigenvalue to a relative accuracy of its own size,
/// for matrices whose small eigenvalues matter (positive definite case).
pub fn kth_eigenvalue_relative(d: &[f64], e: &[f64], k: usize, rel_tol: f64) -> f64 {
    let (mut lo, mut hi) = gershgorin(d, e);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= rel_tol * lo.abs().max(hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Largest eigenvalue of a Hermitian tridiagonal matrix with real diagonal
/// `d` and complex off-diagonal moduli `off_abs`; a diagonal phase change
/// makes it real symmetric.
pub fn max_eigenvalue(d: &[f64], off_abs: &[f64], rel_tol: f64) -> f64 {
    kth_eigenvalue(d, off_abs, d.len() - 1, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_laplacian_eigenvalues() {
        let n = 50;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        for k in [0, 1, 10, 49] {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((kth_eigenvalue(&d, &e, k, 1e-15) - exact).abs() < 1e-13);
        }
        let top = max_eigenvalue(&d, &e, 1e-15);
        assert!((top - (2.0 + 2.0 * (std::f64::consts::PI / 51.0).cos())).abs() < 1e-13);
    }

    #[test]
    fn count_matches_diagonal() {
        let d = [3.0, -1.0, 2.0];
        let e = [0.0, 0.0];
        assert_eq!(count_below(&d, &e, 0.0), 1);
        assert_eq!(count_below(&d, &e, 2.5), 2);
    }
}
