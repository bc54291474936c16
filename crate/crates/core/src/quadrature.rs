//! Adaptive composite Gauss–Legendre quadrature.
//!
//! Panels are bisected until the 16-point estimate of a panel agrees with the
//! sum over its halves to the requested absolute tolerance. Vector-valued
//! integrands are integrated componentwise in one pass.

use crate::error::{Error, Result};
use nalgebra::DVector;
use std::sync::OnceLock;

const NODES: usize = 16;
const MAX_DEPTH: usize = 48;

/// Nodes and weights of the 16-point rule on [-1, 1].
fn gauss_legendre_16() -> &'static [(f64, f64); NODES] {
    static TABLE: OnceLock<[(f64, f64); NODES]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = NODES;
        let mut out = [(0.0, 0.0); NODES];
        for (i, slot) in out.iter_mut().enumerate() {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (pn, dpn) = legendre(n, x);
                let dx = pn / dpn;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dpn) = legendre(n, x);
            *slot = (x, 2.0 / ((1.0 - x * x) * dpn * dpn));
        }
        out
    })
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for &(x, w) in gauss_legendre_16() {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure("non-finite integration bounds".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    fn go<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, whole: f64, depth: usize) -> Result<f64> {
        let mid = 0.5 * (a + b);
        let left = panel(f, a, mid);
        let right = panel(f, mid, b);
        let refined = left + right;
        if !refined.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if (refined - whole).abs() <= tol || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && (refined - whole).abs() > tol * 1e3 {
                return Err(Error::QuadratureFailure(format!(
                    "failed to converge on [{a}, {b}]"
                )));
            }
            return Ok(refined);
        }
        Ok(go(f, a, mid, 0.5 * tol, left, depth + 1)? + go(f, mid, b, 0.5 * tol, right, depth + 1)?)
    }
    let whole = panel(&f, a, b);
    go(&f, a, b, tol, whole, 0)
}

/// Integrate a vector-valued integrand componentwise.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, tol: f64, dim: usize) -> Result<DVector<f64>>
where
    F: Fn(f64) -> DVector<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure("non-finite integration bounds".into()));
    }
    if a == b {
        return Ok(DVector::zeros(dim));
    }
    fn panel_vec<F: Fn(f64) -> DVector<f64>>(f: &F, a: f64, b: f64, dim: usize) -> DVector<f64> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = DVector::zeros(dim);
        for &(x, w) in gauss_legendre_16() {
            acc += f(c + h * x) * w;
        }
        acc * h
    }
    fn go<F: Fn(f64) -> DVector<f64>>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        whole: &DVector<f64>,
        dim: usize,
        depth: usize,
    ) -> Result<DVector<f64>> {
        let mid = 0.5 * (a + b);
        let left = panel_vec(f, a, mid, dim);
        let right = panel_vec(f, mid, b, dim);
        let refined = &left + &right;
        if refined.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        let err = (&refined - whole).amax();
        if err <= tol || depth >= MAX_DEPTH {
            if depth >= MAX_DEPTH && err > tol * 1e3 {
                return Err(Error::QuadratureFailure(format!(
                    "failed to converge on [{a}, {b}]"
                )));
            }
            return Ok(refined);
        }
        Ok(go(f, a, mid, 0.5 * tol, &left, dim, depth + 1)?
            + go(f, mid, b, 0.5 * tol, &right, dim, depth + 1)?)
    }
    let whole = panel_vec(&f, a, b, dim);
    go(&f, a, b, tol, &whole, dim, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert_relative_eq!(v, exact, max_relative = 1e-14);
    }

    #[test]
    fn gaussian_mass_on_wide_interval() {
        let v = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            -10.0,
            10.0,
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kinked_integrand_converges() {
        // |x| over [-1, 2] has a corner at 0; adaptive bisection handles it.
        let v = integrate(|x| x.abs(), -1.0, 2.0, 1e-10).unwrap();
        assert_relative_eq!(v, 2.5, epsilon = 1e-9);
    }

    #[test]
    fn vector_integrand_matches_scalar() {
        let v = integrate_vec(
            |x| DVector::from_vec(vec![x.sin(), x * x]),
            0.0,
            2.0,
            1e-11,
            2,
        )
        .unwrap();
        assert_relative_eq!(v[0], 1.0 - 2.0_f64.cos(), epsilon = 1e-10);
        assert_relative_eq!(v[1], 8.0 / 3.0, epsilon = 1e-10);
    }
}
