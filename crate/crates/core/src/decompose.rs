//! Conversion between unitary matrices and ideal Clements-mesh phases, and
//! Haar-random unitary generation.
//!
//! The decomposition nulls the lower triangle of the input one
//! anti-diagonal at a time, alternating between Givens factors multiplied
//! from the right (undone at the mesh input side) and from the left (mesh
//! output side), then commutes the left factors through the residual
//! diagonal so that `U = D . T_M ... T_1` with every factor an ideal MZI
//! block of this crate's convention.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{frobenius_distance, require_unitary, wrap_angle, ComplexMatrix};
use crate::mesh::{MeshGeometry, MeshState, Placement};
use crate::mzi::MZIParams;

/// Ideal mesh phases reconstructing a unitary, plus the achieved
/// reconstruction error.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub mesh: MeshState,
    pub residual: f64,
}

/// One Givens factor in mesh application order.
#[derive(Clone, Copy, Debug)]
struct AppFactor {
    top_port: usize,
    theta: f64,
    phi: f64,
}

/// Tolerance accepted on the unitarity of decomposition inputs.
pub const UNITARY_INPUT_TOL: f64 = 1e-8;

fn arg(z: Complex64) -> f64 {
    z.arg()
}

/// Solves the Givens factor nulling `(V . T^dagger)[r, c]` with T acting on
/// columns (c, c+1), and applies it to V. Degenerate pivots take phi = 0.
fn right_null(v: &mut ComplexMatrix, r: usize, c: usize) -> (f64, f64) {
    let a = v[(r, c)];
    let b = v[(r, c + 1)];
    let (theta, phi) = if a.norm() == 0.0 || b.norm() == 0.0 {
        (2.0 * b.norm().atan2(a.norm()), 0.0)
    } else {
        (
            2.0 * b.norm().atan2(a.norm()),
            wrap_angle(arg(a) - arg(b) - std::f64::consts::PI),
        )
    };
    let half = theta / 2.0;
    let (s, cth) = (half.sin(), half.cos());
    let pref = Complex64::new(0.0, -1.0) * Complex64::from_polar(1.0, -half);
    let emphi = Complex64::from_polar(1.0, -phi);
    let n = v.nrows();
    for row in 0..n {
        let x = v[(row, c)];
        let y = v[(row, c + 1)];
        v[(row, c)] = pref * (emphi * s * x + cth * y);
        v[(row, c + 1)] = pref * (emphi * cth * x - s * y);
    }
    (theta, phi)
}

/// Solves the Givens factor nulling `(T . V)[r, c]` with T acting on rows
/// (r-1, r), and applies it to V.
fn left_null(v: &mut ComplexMatrix, r: usize, c: usize) -> (f64, f64) {
    let a = v[(r - 1, c)];
    let b = v[(r, c)];
    let (theta, phi) = if a.norm() == 0.0 || b.norm() == 0.0 {
        (2.0 * a.norm().atan2(b.norm()), 0.0)
    } else {
        (2.0 * a.norm().atan2(b.norm()), wrap_angle(arg(b) - arg(a)))
    };
    let half = theta / 2.0;
    let (s, cth) = (half.sin(), half.cos());
    let pref = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, half);
    let ephi = Complex64::from_polar(1.0, phi);
    let n = v.ncols();
    for col in 0..n {
        let x = v[(r - 1, col)];
        let y = v[(r, col)];
        v[(r - 1, col)] = pref * (ephi * s * x + cth * y);
        v[(r, col)] = pref * (ephi * cth * x - s * y);
    }
    (theta, phi)
}

/// Runs the elimination and returns the mesh factors in application order
/// (first factor acts on the input first) together with the output diagonal.
fn clements_factors(u: &ComplexMatrix) -> (Vec<AppFactor>, Vec<Complex64>) {
    let n = u.nrows();
    let mut v = u.clone();
    // (top_port, theta, phi) in chronological elimination order
    let mut rights: Vec<(usize, f64, f64)> = Vec::new();
    let mut lefts: Vec<(usize, f64, f64)> = Vec::new();

    for i in 1..n {
        if i % 2 == 1 {
            for j in 0..i {
                let r = n - 1 - j;
                let c = i - 1 - j;
                let (theta, phi) = right_null(&mut v, r, c);
                rights.push((c, theta, phi));
            }
        } else {
            for j in 1..=i {
                let r = n - 1 + j - i;
                let c = j - 1;
                let (theta, phi) = left_null(&mut v, r, c);
                lefts.push((r - 1, theta, phi));
            }
        }
    }

    let mut diag: Vec<Complex64> = (0..n).map(|k| v[(k, k)]).collect();

    // Commute the inverse left factors through the diagonal:
    // T(theta, phi)^dagger . D = D~ . T(theta, phi~) with
    // phi~ = arg(d1 / d2), d1~ = -e^{-i(theta+phi)} d2, d2~ = -e^{-i theta} d2.
    // Processing innermost-first yields the tilde factors already in
    // application order.
    let mut factors: Vec<AppFactor> =
        rights
            .iter()
            .map(|&(p, theta, phi)| AppFactor {
                top_port: p,
                theta,
                phi,
            })
            .collect();
    for &(p, theta, phi) in lefts.iter().rev() {
        let d1 = diag[p];
        let d2 = diag[p + 1];
        let phi_t = wrap_angle(arg(d1 * d2.conj()));
        diag[p] = -Complex64::from_polar(1.0, -(theta + phi)) * d2;
        diag[p + 1] = -Complex64::from_polar(1.0, -theta) * d2;
        factors.push(AppFactor {
            top_port: p,
            theta,
            phi: phi_t,
        });
    }
    (factors, diag)
}

/// Greedily packs application-ordered factors into mesh columns: each
/// factor lands in the earliest column after every previous factor that
/// shares one of its ports.
fn pack_placements(n: usize, factors: &[AppFactor]) -> Vec<Placement> {
    let mut next_col = vec![0usize; n];
    factors
        .iter()
        .map(|f| {
            let p = f.top_port;
            let column = next_col[p].max(next_col[p + 1]);
            next_col[p] = column + 1;
            next_col[p + 1] = column + 1;
            Placement {
                column,
                top_port: p,
            }
        })
        .collect()
}

/// Decomposes a unitary matrix into ideal Clements-mesh phases.
///
/// All produced thetas lie in `[0, pi]`. Inputs further than
/// [`UNITARY_INPUT_TOL`] from unitary are rejected rather than repaired.
pub fn clements_decompose(u: &ComplexMatrix) -> Result<DecompositionResult> {
    require_unitary(u, UNITARY_INPUT_TOL)?;
    let n = u.nrows();
    if n == 1 {
        let mut mesh = MeshState::zeroed(1);
        mesh.set_phase_screen(0, wrap_angle(u[(0, 0)].arg()));
        let residual = frobenius_distance(u, &mesh.matrix());
        return Ok(DecompositionResult { mesh, residual });
    }

    let (factors, diag) = clements_factors(u);
    let placements = pack_placements(n, &factors);
    let geometry = MeshGeometry::clements(n);
    let mut params = vec![MZIParams::new(0.0, 0.0); geometry.mzi_count()];
    let mut filled = vec![false; geometry.mzi_count()];
    for (f, pl) in factors.iter().zip(&placements) {
        let index = geometry
            .index_of(pl.column, pl.top_port)
            .unwrap_or_else(|| {
                panic!(
                    "factor packed at column {} port {} does not exist in the Clements layout",
                    pl.column, pl.top_port
                )
            });
        assert!(!filled[index], "two factors packed onto one MZI");
        filled[index] = true;
        params[index] = MZIParams::new(f.theta, f.phi);
    }
    assert!(filled.iter().all(|&f| f), "not every MZI was assigned");

    let screen = diag.iter().map(|d| wrap_angle(d.arg())).collect();
    let mesh = MeshState::ideal(geometry, params, screen)?;
    let residual = frobenius_distance(u, &mesh.matrix());
    Ok(DecompositionResult { mesh, residual })
}

/// Running products of the decomposition's Givens factors, in MZI tuning
/// order (mesh application order). The m-th entry is the product of the
/// first m factors; its conjugated rows are the probe vectors used by
/// self-configuration. The first entry is the first factor alone, i.e. the
/// running product over an empty prefix.
pub fn givens_running_products(u: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    let result = clements_decompose(u)?;
    let mesh = result.mesh;
    let n = mesh.n();
    let mut running = crate::linalg::identity(n);
    let mut out = Vec::with_capacity(mesh.geometry().mzi_count());
    for (index, pl) in mesh.geometry().placements().enumerate() {
        let block = crate::mzi::ideal_mzi_transfer(mesh.params()[index]);
        let p = pl.top_port;
        // embed the 2x2 block and multiply onto the running product
        for col in 0..n {
            let x = running[(p, col)];
            let y = running[(p + 1, col)];
            running[(p, col)] = block[(0, 0)] * x + block[(0, 1)] * y;
            running[(p + 1, col)] = block[(1, 0)] * x + block[(1, 1)] * y;
        }
        out.push(running.clone());
    }
    Ok(out)
}

/// Deterministic Haar-random unitary: complex-Gaussian matrix followed by
/// modified Gram-Schmidt (whose R factor has a positive real diagonal, which
/// makes the Q factor Haar-distributed).
pub fn haar_random_unitary(n: usize, seed: u64) -> ComplexMatrix {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = ComplexMatrix::zeros((n, n));
    for r in 0..n {
        for c in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            z[(r, c)] = Complex64::new(re, im);
        }
    }
    // two orthogonalization passes keep n=64 comfortably inside 1e-12
    for _pass in 0..2 {
        for i in 0..n {
            for j in 0..i {
                let proj: Complex64 = (0..n).map(|k| z[(k, j)].conj() * z[(k, i)]).sum();
                for k in 0..n {
                    let adj = proj * z[(k, j)];
                    z[(k, i)] -= adj;
                }
            }
            let norm: f64 = (0..n).map(|k| z[(k, i)].norm_sqr()).sum::<f64>().sqrt();
            for k in 0..n {
                z[(k, i)] /= norm;
            }
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CoreError;
    use crate::linalg::{identity, unitarity_error};
    use std::f64::consts::PI;

    #[test]
    fn haar_is_deterministic_and_unitary() {
        for n in [1, 2, 5, 16] {
            let a = haar_random_unitary(n, 42);
            let b = haar_random_unitary(n, 42);
            assert_eq!(a, b);
            assert!(unitarity_error(&a) < 1e-12, "n={n}");
            let c = haar_random_unitary(n, 43);
            if n > 1 {
                assert!(frobenius_distance(&a, &c) > 1e-3);
            }
        }
    }

    #[test]
    fn haar_top_left_power_has_the_known_mean() {
        // For Haar on U(2), E|U_11|^2 = 1/2.
        let samples = 10_000;
        let mean: f64 = (0..samples)
            .map(|s| haar_random_unitary(2, 1000 + s as u64)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / samples as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn decompose_identity_n4() {
        let u = identity(4);
        let result = clements_decompose(&u).unwrap();
        assert!(result.residual < 1e-12, "residual {}", result.residual);
    }

    #[test]
    fn decompose_single_port() {
        let mut u = identity(1);
        u[(0, 0)] = Complex64::from_polar(1.0, 1.234);
        let result = clements_decompose(&u).unwrap();
        assert!(result.residual < 1e-15);
        assert_eq!(result.mesh.geometry().mzi_count(), 0);
        assert!((result.mesh.phase_screen()[0] - 1.234).abs() < 1e-12);
    }

    #[test]
    fn decompose_round_trip_haar_n8() {
        let u = haar_random_unitary(8, 7);
        let result = clements_decompose(&u).unwrap();
        assert!(result.residual < 1e-10, "residual {}", result.residual);
        assert!(frobenius_distance(&u, &result.mesh.matrix()) < 1e-10);
    }

    #[test]
    fn decomposed_thetas_are_canonical() {
        for (n, seed) in [(2, 1u64), (4, 2), (8, 3), (16, 4)] {
            let u = haar_random_unitary(n, seed);
            let result = clements_decompose(&u).unwrap();
            for p in result.mesh.params() {
                assert!(p.theta() <= PI + 1e-12, "theta {}", p.theta());
            }
        }
    }

    #[test]
    fn double_round_trip_is_stable() {
        let u = haar_random_unitary(8, 77);
        let first = clements_decompose(&u).unwrap();
        let reconstructed = first.mesh.matrix();
        let second = clements_decompose(&reconstructed).unwrap();
        assert!(
            second.residual <= first.residual || second.residual < 1e-12,
            "first {} second {}",
            first.residual,
            second.residual
        );
    }

    #[test]
    fn rejects_non_unitary_input() {
        let mut u = identity(4);
        u[(0, 0)] = Complex64::new(1.5, 0.0);
        match clements_decompose(&u) {
            Err(CoreError::NotUnitary { deviation, .. }) => assert!(deviation > 0.4),
            other => panic!("expected NotUnitary, got {other:?}"),
        }
    }

    #[test]
    fn running_products_have_one_entry_per_mzi() {
        let u = haar_random_unitary(6, 5);
        let products = givens_running_products(&u).unwrap();
        assert_eq!(products.len(), 6 * 5 / 2);
        // each entry is unitary (product of unitaries)
        for v in &products {
            assert!(unitarity_error(v) < 1e-12);
        }
        // the first entry is a single embedded factor: it differs from the
        // identity only on two ports
        let first = &products[0];
        let mut touched = Vec::new();
        for r in 0..6 {
            for c in 0..6 {
                let expected = if r == c { 1.0 } else { 0.0 };
                if (first[(r, c)].norm() - expected).abs() > 1e-12 {
                    touched.push(r);
                }
            }
        }
        touched.sort_unstable();
        touched.dedup();
        assert!(touched.len() <= 2);
    }
}
