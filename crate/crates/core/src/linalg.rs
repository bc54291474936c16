//! Small dense linear-algebra helpers shared across modules.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Solve `a x = b` for symmetric positive-definite `a`, falling back to LU.
pub(crate) fn solve_sym(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    solve_lu(a, b)
}

/// Solve `a x = b` via LU with a finite-solution check.
pub(crate) fn solve_lu(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    match lu.solve(b) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
        _ => Err(Error::SingularSystem),
    }
}

/// `a⁻¹ m a⁻ᵀ` without forming the inverse explicitly.
pub(crate) fn sandwich_product(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    let inner = lu.solve(m).ok_or(Error::SingularBread)?; // a⁻¹ m
    let outer = lu.solve(&inner.transpose()).ok_or(Error::SingularBread)?; // a⁻¹ m' a⁻ᵀ'
    let out = outer.transpose();
    if out.iter().all(|v| v.is_finite()) {
        Ok(symmetrize(&out))
    } else {
        Err(Error::SingularBread)
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sandwich_product_matches_explicit_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.3, -1.5]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let got = sandwich_product(&a, &m).unwrap();
        let ainv = a.try_inverse().unwrap();
        let want = &ainv * &m * ainv.transpose();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(got[(i, j)], want[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_lu(&a, &DVector::from_vec(vec![1.0, 1.0])).is_err());
    }
}
