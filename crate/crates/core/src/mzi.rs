//! Single Mach-Zehnder interferometer: parameters, splitter errors, arm
//! losses and 2x2 transfer matrices.
//!
//! Convention (fixed everywhere in this crate): the external phase shifter
//! `phi` sits on the first input arm, `theta` sits on the top internal arm
//! between the two splitters, so the transfer matrix is the product
//! `B(beta) . diag(e^{i theta}, 1) . B(alpha) . diag(e^{i phi}, 1)`
//! with `B` the (possibly imbalanced) beamsplitter. For ideal splitters this
//! collapses to
//! `i e^{i theta/2} [[e^{i phi} sin(theta/2), cos(theta/2)],
//!                   [e^{i phi} cos(theta/2), -sin(theta/2)]]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{CoreError, Result};
use crate::linalg::{wrap_angle, ComplexMatrix};

/// 2x2 complex matrix in row-major order; internal hot-path representation.
pub(crate) type Mat2 = [Complex64; 4];

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub(crate) fn mat2_to_matrix(m: &Mat2) -> ComplexMatrix {
    ComplexMatrix::from_shape_vec((2, 2), m.to_vec()).expect("2x2 shape")
}

/// Phase-shifter pair of one MZI.
///
/// Angles are stored wrapped into `[0, 2*pi)`; the transfer matrix is
/// exactly 2*pi-periodic in both `theta` and `phi`, so wrapping never
/// changes the implemented matrix and is idempotent. Phase sets produced by
/// decomposition and error correction additionally keep `theta` in
/// `[0, pi]`, the canonical branch used by the correction condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MZIParams {
    theta: f64,
    phi: f64,
}

impl MZIParams {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            phi: wrap_angle(phi),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Beamsplitter error angles (alpha, beta) of one MZI, in radians.
///
/// `alpha` is the left (input-side) splitter error, `beta` the right one.
/// Both are limited to `[-pi/4, pi/4]`: at the endpoints a splitter acts as
/// a plain waveguide or a waveguide crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitterError {
    alpha: f64,
    beta: f64,
}

impl SplitterError {
    const BOUND_SLACK: f64 = 1e-12;

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for value in [alpha, beta] {
            if !value.is_finite() || value.abs() > FRAC_PI_4 + Self::BOUND_SLACK {
                return Err(CoreError::SplitterErrorOutOfRange { value });
            }
        }
        Ok(Self { alpha, beta })
    }

    pub fn zero() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Sum angle `s = alpha + beta`.
    pub fn sum(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Difference angle `d = alpha - beta`.
    pub fn diff(&self) -> f64 {
        self.alpha - self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }
}

/// Per-arm propagation losses of one MZI, in dB (amplitude factor
/// `10^(-L/20)` per arm). Applied on the internal arms, after the theta
/// shifter and before the second splitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmLoss {
    top_db: f64,
    bottom_db: f64,
}

impl ArmLoss {
    pub fn new(top_db: f64, bottom_db: f64) -> Result<Self> {
        for value in [top_db, bottom_db] {
            if !value.is_finite() || value < 0.0 {
                return Err(CoreError::NegativeLoss { value });
            }
        }
        Ok(Self { top_db, bottom_db })
    }

    pub fn lossless() -> Self {
        Self {
            top_db: 0.0,
            bottom_db: 0.0,
        }
    }

    pub fn top_db(&self) -> f64 {
        self.top_db
    }

    pub fn bottom_db(&self) -> f64 {
        self.bottom_db
    }

    pub fn is_lossless(&self) -> bool {
        self.top_db == 0.0 && self.bottom_db == 0.0
    }

    /// Amplitude factor of the top internal arm; exactly 1 at zero loss.
    pub fn top_amplitude(&self) -> f64 {
        db_to_amplitude(self.top_db)
    }

    pub fn bottom_amplitude(&self) -> f64 {
        db_to_amplitude(self.bottom_db)
    }
}

/// Converts a loss in dB to an amplitude factor `10^(-L/20)`.
pub fn db_to_amplitude(loss_db: f64) -> f64 {
    if loss_db == 0.0 {
        1.0
    } else {
        10f64.powf(-loss_db / 20.0)
    }
}

/// Beamsplitter with error angle `a`:
/// `[[cos(pi/4+a), i sin(pi/4+a)], [i sin(pi/4+a), cos(pi/4+a)]]`.
pub(crate) fn splitter_mat(a: f64) -> Mat2 {
    let c = (FRAC_PI_4 + a).cos();
    let s = (FRAC_PI_4 + a).sin();
    [
        Complex64::new(c, 0.0),
        Complex64::new(0.0, s),
        Complex64::new(0.0, s),
        Complex64::new(c, 0.0),
    ]
}

fn phase_mat(angle: f64) -> Mat2 {
    [
        Complex64::from_polar(1.0, angle),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ]
}

pub(crate) fn ideal_mat2(p: MZIParams) -> Mat2 {
    faulty_mat2(p, SplitterError::zero())
}

/// Closed-form faulty transfer matrix, parameterized by the sum and
/// difference of the splitter error angles.
pub(crate) fn faulty_mat2(p: MZIParams, e: SplitterError) -> Mat2 {
    let (sin_h, cos_h) = (p.theta() / 2.0).sin_cos();
    let global = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, p.theta() / 2.0);
    let ephi = Complex64::from_polar(1.0, p.phi());
    let (sin_s, cos_s) = e.sum().sin_cos();
    let (sin_d, cos_d) = e.diff().sin_cos();
    let x = Complex64::new(sin_h * cos_d, cos_h * sin_s);
    let y = Complex64::new(cos_h * cos_s, sin_h * sin_d);
    let yb = Complex64::new(cos_h * cos_s, -sin_h * sin_d);
    let w = Complex64::new(-sin_h * cos_d, cos_h * sin_s);
    [global * ephi * x, global * y, global * ephi * yb, global * w]
}

pub(crate) fn lossy_mat2(p: MZIParams, e: SplitterError, l: ArmLoss) -> Mat2 {
    if l.is_lossless() {
        return faulty_mat2(p, e);
    }
    let gt = l.top_amplitude();
    let gb = l.bottom_amplitude();
    let loss = [
        Complex64::new(gt, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(gb, 0.0),
    ];
    let right = splitter_mat(e.beta());
    let left = splitter_mat(e.alpha());
    let inner = mat2_mul(&phase_mat(p.theta()), &mat2_mul(&left, &phase_mat(p.phi())));
    mat2_mul(&right, &mat2_mul(&loss, &inner))
}

/// Derivatives of the (possibly lossy) transfer matrix with respect to
/// theta and phi, used by reverse-mode gradients. Computed from the
/// splitter-product form, which matches the closed form analytically.
pub(crate) fn mzi_matrix_derivatives(p: MZIParams, e: SplitterError, l: ArmLoss) -> (Mat2, Mat2) {
    let gt = l.top_amplitude();
    let gb = l.bottom_amplitude();
    let loss = [
        Complex64::new(gt, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(gb, 0.0),
    ];
    let right = mat2_mul(&splitter_mat(e.beta()), &loss);
    let left = splitter_mat(e.alpha());
    let zero = Complex64::new(0.0, 0.0);
    // d/dtheta diag(e^{i theta}, 1) = diag(i e^{i theta}, 0)
    let dptheta = [
        Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, p.theta()),
        zero,
        zero,
        zero,
    ];
    let dpphi = [
        Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, p.phi()),
        zero,
        zero,
        zero,
    ];
    let d_theta = mat2_mul(&right, &mat2_mul(&dptheta, &mat2_mul(&left, &phase_mat(p.phi()))));
    let d_phi = mat2_mul(
        &right,
        &mat2_mul(&phase_mat(p.theta()), &mat2_mul(&left, &dpphi)),
    );
    (d_theta, d_phi)
}

/// Transfer matrix of an ideal MZI.
pub fn ideal_mzi_transfer(p: MZIParams) -> ComplexMatrix {
    mat2_to_matrix(&ideal_mat2(p))
}

/// Transfer matrix of an MZI with imbalanced splitters; unitary for any
/// error angles and identical to [`ideal_mzi_transfer`] at zero error.
pub fn faulty_mzi_transfer(p: MZIParams, e: SplitterError) -> ComplexMatrix {
    mat2_to_matrix(&faulty_mat2(p, e))
}

/// Transfer matrix of a faulty MZI with unbalanced internal-arm losses;
/// singular values are at most 1 and equal 1 exactly at zero loss.
pub fn lossy_mzi_transfer(p: MZIParams, e: SplitterError, l: ArmLoss) -> ComplexMatrix {
    mat2_to_matrix(&lossy_mat2(p, e, l))
}
