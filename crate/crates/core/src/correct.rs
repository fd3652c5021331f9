//! Splitter-error correction: forward (ideal -> faulty) and reverse
//! (faulty -> ideal) per-MZI phase corrections, whole-mesh corrections with
//! phase push-through, the transferability condition, maximally faulty
//! error assignments and exact mesh-to-mesh transfer.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_8, PI};

use crate::error::{CoreError, Result, UncorrectableMzi};
use crate::linalg::wrap_angle;
use crate::mesh::MeshState;
use crate::mzi::{MZIParams, SplitterError};

/// Guard for acos arguments: values within this distance outside [-1, 1]
/// are clamped; larger excursions are rejected as uncorrectable.
const ACOS_CLAMP_TOL: f64 = 1e-12;

/// Error-corrected phases for one MZI plus the residual output phases and
/// the intermediate column phases retained for audit.
///
/// For a forward correction, `diag(e^{i psi1}, e^{i psi2}) . T'(theta_out,
/// phi_out, alpha, beta)` reproduces the ideal `T(theta, phi)`. For a
/// reverse correction, `diag(e^{i psi1}, e^{i psi2}) . T(theta_out,
/// phi_out)` reproduces the faulty `T'(theta', phi', alpha, beta)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub theta_out: f64,
    pub phi_out: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub zeta11: f64,
    pub zeta12: f64,
    pub zeta22: f64,
}

impl CorrectionResult {
    pub fn params(&self) -> MZIParams {
        MZIParams::new(self.theta_out, self.phi_out)
    }
}

/// Theta interval exactly realizable by an MZI with the given splitter
/// errors: `[2|alpha+beta|, pi - 2|alpha-beta|]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaRange {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaRange {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    /// Nearest in-range theta; the midpoint when the range is empty.
    pub fn clamp(&self, theta: f64) -> f64 {
        if self.is_empty() {
            0.5 * (self.lo + self.hi)
        } else {
            theta.clamp(self.lo, self.hi)
        }
    }
}

/// Error-correction condition interval for one MZI.
pub fn theta_range(e: SplitterError) -> ThetaRange {
    ThetaRange {
        lo: 2.0 * e.sum().abs(),
        hi: PI - 2.0 * e.diff().abs(),
    }
}

/// True iff `theta` (canonical, in [0, pi]) is exactly realizable by an MZI
/// with errors `e`; the interval is closed on both ends.
pub fn correction_condition(theta: f64, e: SplitterError) -> bool {
    theta_range(e).contains(theta)
}

/// Inner column terms of the faulty transfer matrix at a given theta.
fn column_terms(theta: f64, e: SplitterError) -> (Complex64, Complex64, Complex64) {
    let (sin_h, cos_h) = (theta / 2.0).sin_cos();
    let (sin_s, cos_s) = e.sum().sin_cos();
    let (sin_d, cos_d) = e.diff().sin_cos();
    let x = Complex64::new(sin_h * cos_d, cos_h * sin_s);
    let y = Complex64::new(cos_h * cos_s, sin_h * sin_d);
    let w = Complex64::new(-sin_h * cos_d, cos_h * sin_s);
    (x, y, w)
}

/// Forward correction: phases `(theta', phi')` for a faulty MZI, plus
/// output phases `(psi1, psi2)`, that exactly reproduce the ideal MZI
/// `T(theta, phi)`. Fails when theta violates the correction condition.
pub fn correct_forward(p: MZIParams, e: SplitterError) -> Result<CorrectionResult> {
    let theta = p.theta();
    let c2a = (2.0 * e.alpha()).cos();
    let c2b = (2.0 * e.beta()).cos();
    let s2a = (2.0 * e.alpha()).sin();
    let s2b = (2.0 * e.beta()).sin();
    let raw = (theta.cos() + s2a * s2b) / (c2a * c2b);
    if !(raw.is_finite() && raw.abs() <= 1.0 + ACOS_CLAMP_TOL) {
        let range = theta_range(e);
        return Err(CoreError::Uncorrectable {
            theta,
            alpha: e.alpha(),
            beta: e.beta(),
            lo: range.lo,
            hi: range.hi,
        });
    }
    let theta_p = raw.clamp(-1.0, 1.0).acos();
    let (x, y, w) = column_terms(theta_p, e);
    let zeta11 = x.arg();
    let zeta12 = y.arg();
    let zeta22 = (-w).arg();
    let phi_p = wrap_angle(p.phi() - zeta11 + zeta12);
    let psi1 = wrap_angle((theta - theta_p) / 2.0 - zeta12);
    let psi2 = wrap_angle((theta - theta_p) / 2.0 - zeta22);
    Ok(CorrectionResult {
        theta_out: theta_p,
        phi_out: phi_p,
        psi1,
        psi2,
        zeta11,
        zeta12,
        zeta22,
    })
}

/// Reverse correction: ideal phases `(theta, phi)` plus output phases
/// `(psi1, psi2)` that exactly reproduce the faulty MZI
/// `T'(theta', phi', alpha, beta)`. Always solvable; the returned theta
/// satisfies the correction condition for `e`.
pub fn correct_reverse(p_faulty: MZIParams, e: SplitterError) -> CorrectionResult {
    let theta_p = p_faulty.theta();
    let c2a = (2.0 * e.alpha()).cos();
    let c2b = (2.0 * e.beta()).cos();
    let s2a = (2.0 * e.alpha()).sin();
    let s2b = (2.0 * e.beta()).sin();
    let raw = theta_p.cos() * c2a * c2b - s2a * s2b;
    let theta = raw.clamp(-1.0, 1.0).acos();
    let (x, y, w) = column_terms(theta_p, e);
    let zeta11 = x.arg();
    let zeta12 = y.arg();
    let zeta22 = (-w).arg();
    let phi = wrap_angle(p_faulty.phi() + zeta11 - zeta12);
    let psi1 = wrap_angle((theta_p - theta) / 2.0 + zeta12);
    let psi2 = wrap_angle((theta_p - theta) / 2.0 + zeta22);
    CorrectionResult {
        theta_out: theta,
        phi_out: phi,
        psi1,
        psi2,
        zeta11,
        zeta12,
        zeta22,
    }
}

/// Transferability condition: phases programmed on an MZI with source
/// errors can be exactly re-programmed on one with destination errors iff
/// `|a'+b'| <= |a+b|` and `|a'-b'| <= |a-b|`.
pub fn is_transferable(src: SplitterError, dst: SplitterError) -> bool {
    dst.sum().abs() <= src.sum().abs() && dst.diff().abs() <= src.diff().abs()
}

/// Bound on splitter error angles, with its percent representation
/// `100 sin(2 eps) / 2`. Maximally faulty meshes are meaningful only up to
/// `eps = pi/8` (35.36%), where the realizable theta range collapses to a
/// single value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLevel {
    epsilon: f64,
}

impl ErrorLevel {
    const BOUND_SLACK: f64 = 1e-12;

    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || !(0.0..=FRAC_PI_8 + Self::BOUND_SLACK).contains(&epsilon) {
            return Err(CoreError::ErrorLevelTooLarge { value: epsilon });
        }
        Ok(Self { epsilon })
    }

    pub fn from_percent(percent: f64) -> Result<Self> {
        Self::new(error_level_from_percent(percent))
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn percent(&self) -> f64 {
        error_level_percent(self.epsilon)
    }
}

/// Percent representation of a splitter error angle: `100 sin(2 eps) / 2`,
/// monotone on `[0, pi/4]`.
pub fn error_level_percent(epsilon: f64) -> f64 {
    50.0 * (2.0 * epsilon).sin()
}

/// Inverse of [`error_level_percent`] on `[0, 50]`.
pub fn error_level_from_percent(percent: f64) -> f64 {
    (percent / 50.0).clamp(-1.0, 1.0).asin() / 2.0
}

/// Error assignment of a maximally faulty mesh: every MZI gets
/// `(alpha, beta) = (2 eps, 0)`.
pub fn make_maximally_faulty(mzi_count: usize, lvl: ErrorLevel) -> Vec<SplitterError> {
    let e = SplitterError::new(2.0 * lvl.epsilon(), 0.0)
        .expect("2*eps <= pi/4 is enforced by ErrorLevel");
    vec![e; mzi_count]
}

fn require_correctable_mesh(ideal: &MeshState, errors: &[SplitterError]) -> Result<()> {
    let failures: Vec<UncorrectableMzi> = ideal
        .params()
        .iter()
        .zip(errors)
        .enumerate()
        .filter_map(|(index, (p, e))| {
            let range = theta_range(*e);
            if range.contains(p.theta()) {
                None
            } else {
                Some(UncorrectableMzi {
                    index,
                    theta: p.theta(),
                    lo: range.lo,
                    hi: range.hi,
                })
            }
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CoreError::MeshCorrection { failures })
    }
}

fn check_mesh_correct_inputs(mesh: &MeshState, errors: &[SplitterError]) -> Result<()> {
    if errors.len() != mesh.geometry().mzi_count() {
        return Err(CoreError::DimensionMismatch {
            expected: mesh.geometry().mzi_count(),
            got: errors.len(),
        });
    }
    if !mesh.is_lossless() {
        return Err(CoreError::InvalidMesh(
            "phase correction is defined for lossless meshes".into(),
        ));
    }
    Ok(())
}

/// Sweeps the mesh in application order, applying a per-MZI correction and
/// pushing the residual output phases rightward into later phi values and
/// finally the phase screen. Exact at every step.
fn sweep_mesh<F>(mesh: &MeshState, out_errors: Vec<SplitterError>, mut correct: F) -> Result<MeshState>
where
    F: FnMut(usize, MZIParams) -> Result<CorrectionResult>,
{
    let n = mesh.n();
    let mut chi = vec![0.0f64; n];
    let mut params = Vec::with_capacity(mesh.params().len());
    for (index, pl) in mesh.geometry().placements().enumerate() {
        let p = pl.top_port;
        let old = mesh.params()[index];
        let phi_in = old.phi() + chi[p] - chi[p + 1];
        let common = chi[p + 1];
        let result = correct(index, MZIParams::new(old.theta(), phi_in))?;
        params.push(result.params());
        chi[p] = common + result.psi1;
        chi[p + 1] = common + result.psi2;
    }
    let screen = mesh
        .phase_screen()
        .iter()
        .zip(&chi)
        .map(|(&d, &c)| wrap_angle(d + c))
        .collect();
    MeshState::new(
        mesh.geometry().clone(),
        params,
        out_errors,
        mesh.losses().to_vec(),
        screen,
    )
}

/// Programs an ideal mesh onto faulty hardware: per-MZI forward correction
/// with phase push-through. Every ideal theta must satisfy the correction
/// condition for its target errors; violating MZIs are all reported.
pub fn correct_mesh_forward(ideal: &MeshState, errors: &[SplitterError]) -> Result<MeshState> {
    check_mesh_correct_inputs(ideal, errors)?;
    if !ideal.has_zero_errors() {
        return Err(CoreError::InvalidMesh(
            "forward correction starts from an ideal (zero-error) mesh".into(),
        ));
    }
    require_correctable_mesh(ideal, errors)?;
    sweep_mesh(ideal, errors.to_vec(), |index, p| {
        correct_forward(p, errors[index])
    })
}

/// Like [`correct_mesh_forward`], but clamps out-of-range thetas to the
/// nearest endpoint of their realizable range instead of failing. Returns
/// the corrected mesh and the indices that had to be clamped; the clamped
/// MZIs are approximated, not exact.
pub fn correct_mesh_forward_clamped(
    ideal: &MeshState,
    errors: &[SplitterError],
) -> Result<(MeshState, Vec<usize>)> {
    check_mesh_correct_inputs(ideal, errors)?;
    if !ideal.has_zero_errors() {
        return Err(CoreError::InvalidMesh(
            "forward correction starts from an ideal (zero-error) mesh".into(),
        ));
    }
    let mut clamped = Vec::new();
    let mesh = sweep_mesh(ideal, errors.to_vec(), |index, p| {
        let range = theta_range(errors[index]);
        let theta = if range.contains(p.theta()) {
            p.theta()
        } else {
            clamped.push(index);
            range.clamp(p.theta())
        };
        correct_forward(MZIParams::new(theta, p.phi()), errors[index])
    })?;
    Ok((mesh, clamped))
}

/// Translates a faulty mesh's phases onto an ideal mesh implementing the
/// same matrix. Always solvable.
pub fn correct_mesh_reverse(faulty: &MeshState) -> Result<MeshState> {
    let errors = faulty.errors().to_vec();
    check_mesh_correct_inputs(faulty, &errors)?;
    let zero = vec![SplitterError::zero(); errors.len()];
    sweep_mesh(faulty, zero, |index, p| Ok(correct_reverse(p, errors[index])))
}

/// Transfers a mesh onto hardware with different splitter errors in two
/// steps: reverse correction to an ideal mesh, then forward correction onto
/// the destination errors. Requires per-MZI transferability.
pub fn transfer_mesh(src: &MeshState, dst_errors: &[SplitterError]) -> Result<MeshState> {
    if dst_errors.len() != src.geometry().mzi_count() {
        return Err(CoreError::DimensionMismatch {
            expected: src.geometry().mzi_count(),
            got: dst_errors.len(),
        });
    }
    let violations: Vec<usize> = src
        .errors()
        .iter()
        .zip(dst_errors)
        .enumerate()
        .filter_map(|(i, (s, d))| if is_transferable(*s, *d) { None } else { Some(i) })
        .collect();
    if !violations.is_empty() {
        return Err(CoreError::NotTransferable { violations });
    }
    let ideal = correct_mesh_reverse(src)?;
    correct_mesh_forward(&ideal, dst_errors)
}
