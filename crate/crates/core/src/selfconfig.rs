//! Self-configuration: programming a target unitary into a black-box
//! faulty mesh using only injected probes and output measurements.
//!
//! The procedure never reads the hidden splitter errors. It decomposes the
//! target, seeds every MZI at the ideal phases, and drives the mesh toward
//! the target in two stages:
//!
//! 1. a per-MZI nulling sweep, in mesh application order, that alternates
//!    1-D refinements on theta and phi using power readings only. The
//!    objective for each MZI is the total stray power: summed over the
//!    conjugated columns of the target (columns of the final Givens
//!    running product), the power leaving on every port other than the
//!    column's own. A perfectly configured mesh routes each such probe to
//!    a single port, so the objective has an exact zero whenever every
//!    decomposed theta satisfies the correction condition for the hidden
//!    errors.
//! 2. a damped least-squares refinement (Levenberg-Marquardt) of all
//!    phases against the coherently measured basis responses. Power
//!    readings alone cannot pin the output phase screen, and single-port
//!    nulls cannot isolate mid-mesh MZIs through unconfigured neighbours,
//!    so this stage works with measured amplitudes.
//!
//! Nulls established by the sweep survive later tuning: once a probe
//! leaves a port dark because the mesh matrix matches the target there,
//! later steps only reduce the remaining mismatch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decompose::clements_decompose;
use crate::error::{CoreError, Result};
use crate::linalg::{dagger, frobenius_distance, require_unitary, ComplexMatrix, ComplexVector};
use crate::mesh::MeshState;
use crate::mzi::MZIParams;

/// Which phase shifter of an MZI to drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseShifter {
    Theta,
    Phi,
}

/// A mesh whose splitter errors are hidden from the caller. The interface
/// is write-only for phases and measure-only for fields: nothing exposes
/// the error angles.
#[derive(Clone, Debug)]
pub struct BlackBoxMesh {
    hidden: MeshState,
    measurements: std::cell::Cell<usize>,
}

impl BlackBoxMesh {
    pub fn new(hidden: MeshState) -> Self {
        Self {
            hidden,
            measurements: std::cell::Cell::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.hidden.n()
    }

    pub fn mzi_count(&self) -> usize {
        self.hidden.geometry().mzi_count()
    }

    /// Total number of measurements taken so far.
    pub fn measurement_count(&self) -> usize {
        self.measurements.get()
    }

    pub fn set_phase(&mut self, mzi_index: usize, which: PhaseShifter, value: f64) {
        let old = self.hidden.params()[mzi_index];
        let new = match which {
            PhaseShifter::Theta => MZIParams::new(value, old.phi()),
            PhaseShifter::Phi => MZIParams::new(old.theta(), value),
        };
        self.hidden.set_params(mzi_index, new);
    }

    pub fn current_phase(&self, mzi_index: usize, which: PhaseShifter) -> f64 {
        let p = self.hidden.params()[mzi_index];
        match which {
            PhaseShifter::Theta => p.theta(),
            PhaseShifter::Phi => p.phi(),
        }
    }

    pub fn set_screen(&mut self, port: usize, value: f64) {
        self.hidden.set_phase_screen(port, value);
    }

    pub fn current_screen(&self, port: usize) -> f64 {
        self.hidden.phase_screen()[port]
    }

    /// Injects a field and returns the output amplitudes.
    pub fn measure(&self, input: &ComplexVector) -> Result<ComplexVector> {
        self.measurements.set(self.measurements.get() + 1);
        self.hidden.propagate(input)
    }

    /// Output power at one port for a given probe.
    pub fn measure_power(&self, input: &ComplexVector, port: usize) -> Result<f64> {
        Ok(self.measure(input)?[port].norm_sqr())
    }
}

/// Tuning limits for the configuration stages.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NullingConfig {
    /// Measurement budget per MZI for the power-only nulling stage.
    pub max_iterations: usize,
    /// A null is accepted once the measured power falls below this.
    pub power_tol: f64,
    /// Iteration cap for the least-squares refinement stage.
    pub refine_max_iterations: usize,
    /// The refinement stops once the Frobenius residual falls below this.
    pub residual_tol: f64,
}

impl Default for NullingConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            power_tol: 1e-20,
            refine_max_iterations: 80,
            residual_tol: 1e-11,
        }
    }
}

/// Result of tuning one MZI during the nulling sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullRecord {
    pub mzi_index: usize,
    /// Stray power left after tuning this MZI.
    pub final_power: f64,
    pub measurements: usize,
    pub converged: bool,
}

/// Outcome of a full self-configuration run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelfConfigReport {
    /// Frobenius distance between the configured mesh (measured on basis
    /// inputs) and the target.
    pub residual: f64,
    /// Total measurements across both stages.
    pub iterations: usize,
    /// Least-squares refinement iterations used.
    pub refine_iterations: usize,
    pub per_mzi: Vec<NullRecord>,
}

impl SelfConfigReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Probes that a configured mesh routes to single ports: conjugated
/// columns of the target, i.e. phase-twisted columns of the complete
/// Givens running product. Probe `j` exits entirely on port `j` when the
/// mesh implements the target.
pub fn single_port_probes(target: &ComplexMatrix) -> Vec<ComplexVector> {
    let n = target.nrows();
    let adj = dagger(target);
    (0..n)
        .map(|j| ComplexVector::from_shape_fn(n, |k| adj[(k, j)]))
        .collect()
}

/// Power leaving on every port other than `home` for one probe.
fn stray_power(bb: &BlackBoxMesh, probe: &ComplexVector, home: usize) -> Result<f64> {
    let out = bb.measure(probe)?;
    Ok(out
        .iter()
        .enumerate()
        .filter(|(q, _)| *q != home)
        .map(|(_, z)| z.norm_sqr())
        .sum())
}

/// Minimizes a measured objective over one phase axis. The power of any
/// fixed probe at any port is an exact sinusoid `A + C cos t + S sin t` in
/// either phase of one MZI, and so is any sum of such powers; three
/// samples determine the minimizer exactly.
fn trig_axis_step<F>(
    bb: &mut BlackBoxMesh,
    mzi: usize,
    which: PhaseShifter,
    objective: &mut F,
) -> Result<f64>
where
    F: FnMut(&mut BlackBoxMesh) -> Result<f64>,
{
    let third = 2.0 * std::f64::consts::FRAC_PI_3;
    let start = bb.current_phase(mzi, which);
    let p0 = objective(bb)?;
    bb.set_phase(mzi, which, start + third);
    let p1 = objective(bb)?;
    bb.set_phase(mzi, which, start + 2.0 * third);
    let p2 = objective(bb)?;
    let c = (2.0 / 3.0) * (p0 + p1 * third.cos() + p2 * (2.0 * third).cos());
    let s = (2.0 / 3.0) * (p1 * third.sin() + p2 * (2.0 * third).sin());
    let minimizer = f64::atan2(s, c) + std::f64::consts::PI + start;
    bb.set_phase(mzi, which, minimizer);
    let p_new = objective(bb)?;
    if p_new <= p0 {
        Ok(p_new)
    } else {
        bb.set_phase(mzi, which, start);
        Ok(p0)
    }
}

/// Tunes one MZI until the probe's power at `out_port` is nulled, by
/// alternating exact 1-D refinements on theta and phi. Power readings
/// only; the best-power sequence is non-increasing. Returns the tuned
/// phases and the nulling record.
pub fn null_output(
    bb: &mut BlackBoxMesh,
    mzi_index: usize,
    probe: &ComplexVector,
    out_port: usize,
    seed: MZIParams,
    cfg: &NullingConfig,
) -> Result<(MZIParams, NullRecord)> {
    let start_measurements = bb.measurement_count();
    bb.set_phase(mzi_index, PhaseShifter::Theta, seed.theta());
    bb.set_phase(mzi_index, PhaseShifter::Phi, seed.phi());
    let mut best = bb.measure_power(probe, out_port)?;
    let used = |bb: &BlackBoxMesh| bb.measurement_count() - start_measurements;

    while best > cfg.power_tol && used(bb) + 8 <= cfg.max_iterations {
        let mut objective =
            |bb: &mut BlackBoxMesh| bb.measure_power(probe, out_port);
        let after_theta = trig_axis_step(bb, mzi_index, PhaseShifter::Theta, &mut objective)?;
        let after_phi = trig_axis_step(bb, mzi_index, PhaseShifter::Phi, &mut objective)?;
        let now = after_theta.min(after_phi);
        if now >= best * (1.0 - 1e-12) && now > cfg.power_tol {
            // alternation has plateaued at this probe's floor
            best = best.min(now);
            break;
        }
        best = best.min(now);
    }
    let params = MZIParams::new(
        bb.current_phase(mzi_index, PhaseShifter::Theta),
        bb.current_phase(mzi_index, PhaseShifter::Phi),
    );
    let record = NullRecord {
        mzi_index,
        final_power: best,
        measurements: used(bb),
        converged: best <= cfg.power_tol,
    };
    Ok((params, record))
}

/// Reads the full transfer matrix by injecting the n basis vectors.
pub fn measure_matrix(bb: &BlackBoxMesh) -> Result<ComplexMatrix> {
    let n = bb.n();
    let mut out = ComplexMatrix::zeros((n, n));
    for j in 0..n {
        let mut basis = ComplexVector::zeros(n);
        basis[j] = Complex64::new(1.0, 0.0);
        let response = bb.measure(&basis)?;
        for i in 0..n {
            out[(i, j)] = response[i];
        }
    }
    Ok(out)
}

/// Solves `(J^T J + lambda I) x = J^T r` by Cholesky decomposition.
fn solve_damped_normal(jtj: &[Vec<f64>], jtr: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let p = jtr.len();
    let mut a = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = jtj[i][j];
        }
        a[i][i] += lambda;
    }
    // in-place Cholesky
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= a[i][k] * a[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                a[i][i] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    let mut y = vec![0.0; p];
    for i in 0..p {
        let mut sum = jtr[i];
        for k in 0..i {
            sum -= a[i][k] * y[k];
        }
        y[i] = sum / a[i][i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let mut sum = y[i];
        for k in i + 1..p {
            sum -= a[k][i] * x[k];
        }
        x[i] = sum / a[i][i];
    }
    Some(x)
}

fn read_params(bb: &BlackBoxMesh) -> Vec<f64> {
    let m = bb.mzi_count();
    let n = bb.n();
    let mut out = Vec::with_capacity(2 * m + n);
    for i in 0..m {
        out.push(bb.current_phase(i, PhaseShifter::Theta));
        out.push(bb.current_phase(i, PhaseShifter::Phi));
    }
    for p in 0..n {
        out.push(bb.current_screen(p));
    }
    out
}

fn write_params(bb: &mut BlackBoxMesh, flat: &[f64]) {
    let m = bb.mzi_count();
    let n = bb.n();
    for i in 0..m {
        bb.set_phase(i, PhaseShifter::Theta, flat[2 * i]);
        bb.set_phase(i, PhaseShifter::Phi, flat[2 * i + 1]);
    }
    for p in 0..n {
        bb.set_screen(p, flat[2 * m + p]);
    }
}

/// Damped least-squares refinement of all phases against the measured
/// basis responses. The Jacobian is measured on the black box itself with
/// forward differences, so the fixed point is an exactly matching mesh.
fn refine_least_squares(
    bb: &mut BlackBoxMesh,
    target: &ComplexMatrix,
    cfg: &NullingConfig,
) -> Result<usize> {
    let n = bb.n();
    let m = bb.mzi_count();
    let p = 2 * m + n;
    let h = 1e-6;
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for _ in 0..cfg.refine_max_iterations {
        let base = measure_matrix(bb)?;
        let residual_norm = frobenius_distance(&base, target);
        if residual_norm < cfg.residual_tol {
            break;
        }
        iterations += 1;
        // measured Jacobian, one parameter at a time
        let params = read_params(bb);
        let mut jt = vec![vec![0.0; 2 * n * n]; p];
        for k in 0..p {
            let mut bumped = params.clone();
            bumped[k] += h;
            write_params(bb, &bumped);
            let shifted = measure_matrix(bb)?;
            write_params(bb, &params);
            for (idx, (a, b)) in shifted.iter().zip(base.iter()).enumerate() {
                let d = (a - b) / h;
                jt[k][idx] = d.re;
                jt[k][n * n + idx] = d.im;
            }
        }
        let r: Vec<f64> = {
            let mut v = vec![0.0; 2 * n * n];
            for (idx, (a, b)) in base.iter().zip(target.iter()).enumerate() {
                let d = a - b;
                v[idx] = d.re;
                v[n * n + idx] = d.im;
            }
            v
        };
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for i in 0..p {
            for j in i..p {
                let dot: f64 = jt[i].iter().zip(&jt[j]).map(|(x, y)| x * y).sum();
                jtj[i][j] = dot;
                jtj[j][i] = dot;
            }
            jtr[i] = jt[i].iter().zip(&r).map(|(x, y)| x * y).sum();
        }
        let mut improved = false;
        for _ in 0..10 {
            let Some(step) = solve_damped_normal(&jtj, &jtr, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let candidate: Vec<f64> =
                params.iter().zip(&step).map(|(v, s)| v - s).collect();
            write_params(bb, &candidate);
            let new_norm = frobenius_distance(&measure_matrix(bb)?, target);
            if new_norm < residual_norm {
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                break;
            }
            write_params(bb, &params);
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(iterations)
}

/// Programs `target` into the black-box mesh: decomposition-seeded
/// per-MZI power nulling followed by measured-Jacobian least squares.
/// Out-of-range hidden errors produce a floor residual in the report, not
/// an error.
pub fn self_configure(
    bb: &mut BlackBoxMesh,
    target: &ComplexMatrix,
    cfg: &NullingConfig,
) -> Result<SelfConfigReport> {
    require_unitary(target, crate::decompose::UNITARY_INPUT_TOL)?;
    if bb.n() != target.nrows() {
        return Err(CoreError::DimensionMismatch {
            expected: bb.n(),
            got: target.nrows(),
        });
    }
    let n = bb.n();
    let ideal = clements_decompose(target)?.mesh;

    // seed at the decomposition
    for (i, p) in ideal.params().iter().enumerate() {
        bb.set_phase(i, PhaseShifter::Theta, p.theta());
        bb.set_phase(i, PhaseShifter::Phi, p.phi());
    }
    for (port, &d) in ideal.phase_screen().iter().enumerate() {
        bb.set_screen(port, d);
    }

    // stage 1: per-MZI power-only nulling sweep over the total stray power
    let probes = single_port_probes(target);
    let total_stray = |bb: &mut BlackBoxMesh| -> Result<f64> {
        let mut sum = 0.0;
        for (j, probe) in probes.iter().enumerate() {
            sum += stray_power(bb, probe, j)?;
        }
        Ok(sum)
    };
    let mut per_mzi = Vec::with_capacity(bb.mzi_count());
    let start_total = bb.measurement_count();
    let mut current = total_stray(bb)?;
    for mzi in 0..bb.mzi_count() {
        let start = bb.measurement_count();
        while current > cfg.power_tol
            && bb.measurement_count() - start + 8 * n <= cfg.max_iterations
        {
            let mut objective = |bb: &mut BlackBoxMesh| total_stray(bb);
            let after_theta = trig_axis_step(bb, mzi, PhaseShifter::Theta, &mut objective)?;
            let after_phi = trig_axis_step(bb, mzi, PhaseShifter::Phi, &mut objective)?;
            let now = after_theta.min(after_phi);
            if now >= current * (1.0 - 1e-9) {
                current = current.min(now);
                break;
            }
            current = current.min(now);
        }
        per_mzi.push(NullRecord {
            mzi_index: mzi,
            final_power: current,
            measurements: bb.measurement_count() - start,
            converged: current <= cfg.power_tol,
        });
    }

    // stage 2: coherent least-squares refinement of all phases
    let refine_iterations = refine_least_squares(bb, target, cfg)?;

    let residual = frobenius_distance(&measure_matrix(bb)?, target);
    Ok(SelfConfigReport {
        residual,
        iterations: bb.measurement_count() - start_total,
        refine_iterations,
        per_mzi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correct::theta_range;
    use crate::decompose::haar_random_unitary;
    use crate::mesh::MeshGeometry;
    use crate::mzi::SplitterError;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn hidden_mesh(n: usize, error_scale: f64, seed: u64) -> MeshState {
        let geometry = MeshGeometry::clements(n);
        let m = geometry.mzi_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..m)
            .map(|_| {
                MZIParams::new(
                    rng.random_range(0.0..2.0 * PI),
                    rng.random_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let errors = (0..m)
            .map(|_| {
                SplitterError::new(
                    rng.random_range(-error_scale..=error_scale),
                    rng.random_range(-error_scale..=error_scale),
                )
                .unwrap()
            })
            .collect();
        let screen = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        MeshState::new(
            geometry,
            params,
            errors,
            vec![crate::mzi::ArmLoss::lossless(); m],
            screen,
        )
        .unwrap()
    }

    /// Finds (target, hidden mesh) pairs whose decomposed thetas satisfy
    /// the correction condition for the hidden errors, so the exactness
    /// contract applies.
    fn in_range_fixture(n: usize, error_scale: f64, base_seed: u64) -> (ComplexMatrix, MeshState) {
        for offset in 0..50 {
            let target = haar_random_unitary(n, base_seed + offset);
            let hidden = hidden_mesh(n, error_scale, base_seed + 1000 + offset);
            let ideal = clements_decompose(&target).unwrap().mesh;
            let ok = ideal
                .params()
                .iter()
                .zip(hidden.errors())
                .all(|(p, e)| theta_range(*e).contains(p.theta()));
            if ok {
                return (target, hidden);
            }
        }
        panic!("no in-range fixture found for n={n}, scale={error_scale}");
    }

    #[test]
    fn null_output_solves_single_ideal_mzi_analytically() {
        // one MZI, probe on port 0, null port 1: output1 = i e^{i theta/2}
        // e^{i phi} cos(theta/2) vanishes exactly at theta = pi
        let mut bb = BlackBoxMesh::new(hidden_mesh(2, 0.0, 1));
        let mut probe = ComplexVector::zeros(2);
        probe[0] = Complex64::new(1.0, 0.0);
        let (params, record) = null_output(
            &mut bb,
            0,
            &probe,
            1,
            MZIParams::new(std::f64::consts::FRAC_PI_2, 0.0),
            &NullingConfig::default(),
        )
        .unwrap();
        assert!(record.converged, "final power {}", record.final_power);
        assert!(record.final_power < 1e-20);
        assert!((params.theta() - PI).abs() < 1e-8, "theta {}", params.theta());
    }

    #[test]
    fn null_output_reaches_floor_on_faulty_in_range_mzi() {
        let mut mesh = hidden_mesh(2, 0.0, 2);
        mesh.set_errors(vec![SplitterError::new(0.08, -0.05).unwrap()])
            .unwrap();
        let mut bb = BlackBoxMesh::new(mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut probe = ComplexVector::from_shape_fn(2, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let norm: f64 = probe.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        probe.mapv_inplace(|z| z / norm);
        let (_, record) = null_output(
            &mut bb,
            0,
            &probe,
            1,
            MZIParams::new(std::f64::consts::FRAC_PI_2, 0.0),
            &NullingConfig::default(),
        )
        .unwrap();
        assert!(
            record.final_power < 1e-20,
            "power floor {}",
            record.final_power
        );
    }

    #[test]
    fn null_output_floor_matches_grid_scan_when_out_of_range() {
        // a basis probe on a strongly faulty MZI has a positive power
        // floor; the tuner must reach the floor a dense scan finds
        let mut mesh = hidden_mesh(2, 0.0, 4);
        let error = SplitterError::new(0.55, -0.35).unwrap();
        mesh.set_errors(vec![error]).unwrap();
        let mut probe = ComplexVector::zeros(2);
        probe[0] = Complex64::new(1.0, 0.0);

        let mut grid_min = f64::INFINITY;
        let steps = 400;
        let mut scan_mesh = mesh.clone();
        for i in 0..steps {
            for j in 0..steps {
                let theta = 2.0 * PI * i as f64 / steps as f64;
                let phi = 2.0 * PI * j as f64 / steps as f64;
                scan_mesh.set_params(0, MZIParams::new(theta, phi));
                let out = scan_mesh.propagate(&probe).unwrap();
                grid_min = grid_min.min(out[1].norm_sqr());
            }
        }

        let mut bb = BlackBoxMesh::new(mesh);
        let (_, record) = null_output(
            &mut bb,
            0,
            &probe,
            1,
            MZIParams::new(std::f64::consts::FRAC_PI_2, 0.0),
            &NullingConfig::default(),
        )
        .unwrap();
        assert!(
            record.final_power <= grid_min + 1e-9,
            "tuned {} vs grid {}",
            record.final_power,
            grid_min
        );
    }

    #[test]
    fn single_port_probes_reach_one_port_on_matching_mesh() {
        let n = 5;
        let target = haar_random_unitary(n, 9);
        let mesh = clements_decompose(&target).unwrap().mesh;
        let bb = BlackBoxMesh::new(mesh);
        for (j, probe) in single_port_probes(&target).iter().enumerate() {
            let out = bb.measure(probe).unwrap();
            for (q, z) in out.iter().enumerate() {
                if q == j {
                    assert!((z.norm() - 1.0).abs() < 1e-10);
                } else {
                    assert!(z.norm_sqr() < 1e-20, "stray power at port {q}");
                }
            }
        }
    }

    #[test]
    fn configures_error_free_mesh_and_recovers_decomposition_phases() {
        let n = 6;
        let target = haar_random_unitary(n, 10);
        let mut bb = BlackBoxMesh::new(hidden_mesh(n, 0.0, 11));
        let report = self_configure(&mut bb, &target, &NullingConfig::default()).unwrap();
        assert!(report.residual < 1e-8, "residual {}", report.residual);

        // with zero hidden errors the tuned phases match the decomposition
        let ideal = clements_decompose(&target).unwrap().mesh;
        for (i, p) in ideal.params().iter().enumerate() {
            let got_theta = bb.current_phase(i, PhaseShifter::Theta);
            let dt = (got_theta - p.theta()).abs();
            let dt = dt.min((dt - 2.0 * PI).abs());
            assert!(dt < 1e-6, "mzi {i} theta {} vs {}", got_theta, p.theta());
        }
    }

    #[test]
    fn configures_faulty_mesh_within_error_budget() {
        let n = 6;
        let (target, hidden) = in_range_fixture(n, 0.05, 20);
        let mut bb = BlackBoxMesh::new(hidden);
        let report = self_configure(&mut bb, &target, &NullingConfig::default()).unwrap();
        assert!(report.residual < 1e-6, "residual {}", report.residual);
    }

    #[test]
    fn out_of_range_hidden_error_reports_floor_without_panicking() {
        let n = 4;
        let target = haar_random_unitary(n, 30);
        let ideal = clements_decompose(&target).unwrap().mesh;
        let mut hidden = hidden_mesh(n, 0.0, 31);
        let victim = ideal
            .params()
            .iter()
            .position(|p| {
                !theta_range(SplitterError::new(0.35, 0.35).unwrap()).contains(p.theta())
            })
            .expect("some theta violates the big-error range");
        let mut errors = vec![SplitterError::zero(); hidden.geometry().mzi_count()];
        errors[victim] = SplitterError::new(0.35, 0.35).unwrap();
        hidden.set_errors(errors).unwrap();

        let mut bb = BlackBoxMesh::new(hidden);
        let report = self_configure(&mut bb, &target, &NullingConfig::default()).unwrap();
        assert!(report.residual > 1e-8, "a floor residual is expected");
        assert!(report.residual.is_finite());
    }

    #[test]
    fn established_nulls_survive_full_configuration() {
        let n = 6;
        let (target, hidden) = in_range_fixture(n, 0.04, 40);
        let mut bb = BlackBoxMesh::new(hidden);
        let report = self_configure(&mut bb, &target, &NullingConfig::default()).unwrap();
        assert!(report.residual < 1e-6);
        // every (probe, off-port) null pair established during
        // configuration still holds afterwards
        for (j, probe) in single_port_probes(&target).iter().enumerate() {
            let out = bb.measure(probe).unwrap();
            for (q, z) in out.iter().enumerate() {
                if q != j {
                    assert!(
                        z.norm_sqr() < 1e-10,
                        "null (probe {j}, port {q}) regressed to {}",
                        z.norm_sqr()
                    );
                }
            }
        }
    }
}
