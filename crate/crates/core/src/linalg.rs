//! Dense complex linear-algebra carriers and small helpers.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Dense complex matrix used for transfer matrices.
pub type ComplexMatrix = Array2<Complex64>;
/// Dense complex vector used for optical fields.
pub type ComplexVector = Array1<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// n x n identity.
pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_shape_fn((n, n), |(r, c)| if r == c { ONE } else { ZERO })
}

/// Conjugate transpose.
pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.t().mapv(|z| z.conj())
}

/// Frobenius norm of `a - b`.
pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Frobenius norm of `U^dagger U - I`; zero for a unitary matrix.
pub fn unitarity_error(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    let product = dagger(u).dot(u);
    frobenius_distance(&product, &identity(n))
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Checks `u` is square and unitary within `tolerance`.
pub fn require_unitary(u: &ComplexMatrix, tolerance: f64) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(CoreError::DimensionMismatch {
            expected: u.nrows(),
            got: u.ncols(),
        });
    }
    let deviation = unitarity_error(u);
    if deviation > tolerance {
        return Err(CoreError::NotUnitary {
            deviation,
            tolerance,
        });
    }
    Ok(())
}

/// Singular values of a 2x2 complex matrix, descending.
///
/// Computed from the eigenvalues of `A^dagger A` via the quadratic formula,
/// which is exact enough for loss-factor checks on well-conditioned MZIs.
pub fn singular_values_2x2(m: &ComplexMatrix) -> (f64, f64) {
    debug_assert_eq!(m.dim(), (2, 2));
    let h = dagger(m).dot(m);
    // h is Hermitian positive semidefinite
    let tr = h[(0, 0)].re + h[(1, 1)].re;
    let det = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let l1 = 0.5 * (tr + disc);
    let l2 = 0.5 * (tr - disc);
    (l1.max(0.0).sqrt(), l2.max(0.0).sqrt())
}

/// Wraps an angle into `[0, 2*pi)`. Idempotent for values already in range.
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    if (0.0..tau).contains(&x) {
        return x;
    }
    let r = x.rem_euclid(tau);
    // rem_euclid can return tau itself when x is a tiny negative number
    if r >= tau {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_is_idempotent_and_in_range() {
        for &x in &[-7.1, -0.0, 0.0, 1.0, 3.999, 6.283, 12.7, -1e-18] {
            let w = wrap_angle(x);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{x} -> {w}");
            assert_eq!(wrap_angle(w), w);
        }
    }

    #[test]
    fn singular_values_of_identity() {
        let (s1, s2) = singular_values_2x2(&identity(2));
        assert!((s1 - 1.0).abs() < 1e-14);
        assert!((s2 - 1.0).abs() < 1e-14);
    }
}
