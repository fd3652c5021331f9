//! Rectangular Clements meshes: geometry, per-MZI state, transfer matrices
//! and field propagation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::linalg::{wrap_angle, ComplexMatrix, ComplexVector};
use crate::mzi::{lossy_mat2, ArmLoss, MZIParams, SplitterError};

/// Placement of one MZI: mesh column and the upper of the two ports it
/// couples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Placement {
    pub column: usize,
    pub top_port: usize,
}

/// Rectangular Clements layout for `n` ports: `n` columns whose MZI counts
/// alternate between `floor(n/2)` and `floor((n-1)/2)`, `n(n-1)/2` MZIs in
/// total. Even columns start at port 0, odd columns at port 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshGeometry {
    n: usize,
    columns: Vec<Vec<usize>>,
}

impl MeshGeometry {
    pub fn clements(n: usize) -> Self {
        assert!(n >= 1, "port count must be at least 1");
        let columns = (0..n)
            .map(|c| {
                let start = c % 2;
                (start..n.saturating_sub(1)).step_by(2).collect()
            })
            .collect();
        Self { n, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of MZIs, `n(n-1)/2`.
    pub fn mzi_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    /// Placements in geometry index order: column-major, top to bottom.
    pub fn placements(&self) -> impl Iterator<Item = Placement> + '_ {
        self.columns.iter().enumerate().flat_map(|(column, tops)| {
            tops.iter().map(move |&top_port| Placement { column, top_port })
        })
    }

    /// Geometry index of the MZI at (column, top_port), if present.
    pub fn index_of(&self, column: usize, top_port: usize) -> Option<usize> {
        let mut index = 0;
        for (c, tops) in self.columns.iter().enumerate() {
            for &t in tops {
                if c == column && t == top_port {
                    return Some(index);
                }
                index += 1;
            }
        }
        None
    }
}

/// Full state of one mesh: geometry, per-MZI phases, splitter errors,
/// arm losses and the output phase screen `D`.
///
/// Arrays are indexed in geometry order (column-major, top to bottom). The
/// mesh transfer matrix is `D * M_{n-1} * ... * M_0` with `M_c` the embedded
/// MZI products of column `c`; column 0 acts on the input first.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshState {
    geometry: MeshGeometry,
    params: Vec<MZIParams>,
    errors: Vec<SplitterError>,
    losses: Vec<ArmLoss>,
    phase_screen: Vec<f64>,
}

impl MeshState {
    pub fn new(
        geometry: MeshGeometry,
        params: Vec<MZIParams>,
        errors: Vec<SplitterError>,
        losses: Vec<ArmLoss>,
        phase_screen: Vec<f64>,
    ) -> Result<Self> {
        let m = geometry.mzi_count();
        for (name, len) in [
            ("params", params.len()),
            ("errors", errors.len()),
            ("losses", losses.len()),
        ] {
            if len != m {
                return Err(CoreError::InvalidMesh(format!(
                    "{name} has {len} entries, geometry needs {m}"
                )));
            }
        }
        if phase_screen.len() != geometry.n() {
            return Err(CoreError::InvalidMesh(format!(
                "phase screen has {} entries, geometry needs {}",
                phase_screen.len(),
                geometry.n()
            )));
        }
        Ok(Self {
            geometry,
            params,
            errors,
            losses,
            phase_screen,
        })
    }

    /// Lossless, error-free mesh with the given phases.
    pub fn ideal(geometry: MeshGeometry, params: Vec<MZIParams>, phase_screen: Vec<f64>) -> Result<Self> {
        let m = geometry.mzi_count();
        Self::new(
            geometry,
            params,
            vec![SplitterError::zero(); m],
            vec![ArmLoss::lossless(); m],
            phase_screen,
        )
    }

    /// All-zero-phase, error-free mesh.
    pub fn zeroed(n: usize) -> Self {
        let geometry = MeshGeometry::clements(n);
        let m = geometry.mzi_count();
        Self {
            geometry,
            params: vec![MZIParams::new(0.0, 0.0); m],
            errors: vec![SplitterError::zero(); m],
            losses: vec![ArmLoss::lossless(); m],
            phase_screen: vec![0.0; n],
        }
    }

    pub fn geometry(&self) -> &MeshGeometry {
        &self.geometry
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn params(&self) -> &[MZIParams] {
        &self.params
    }

    pub fn errors(&self) -> &[SplitterError] {
        &self.errors
    }

    pub fn losses(&self) -> &[ArmLoss] {
        &self.losses
    }

    pub fn phase_screen(&self) -> &[f64] {
        &self.phase_screen
    }

    pub fn set_params(&mut self, index: usize, params: MZIParams) {
        self.params[index] = params;
    }

    pub fn set_phase_screen(&mut self, port: usize, value: f64) {
        self.phase_screen[port] = value;
    }

    pub fn set_errors(&mut self, errors: Vec<SplitterError>) -> Result<()> {
        if errors.len() != self.params.len() {
            return Err(CoreError::InvalidMesh(format!(
                "errors has {} entries, geometry needs {}",
                errors.len(),
                self.params.len()
            )));
        }
        self.errors = errors;
        Ok(())
    }

    pub fn set_losses(&mut self, losses: Vec<ArmLoss>) -> Result<()> {
        if losses.len() != self.params.len() {
            return Err(CoreError::InvalidMesh(format!(
                "losses has {} entries, geometry needs {}",
                losses.len(),
                self.params.len()
            )));
        }
        self.losses = losses;
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        self.losses.iter().all(|l| l.is_lossless())
    }

    pub fn has_zero_errors(&self) -> bool {
        self.errors.iter().all(|e| e.is_zero())
    }

    /// Propagates a field through the mesh, column by column, without
    /// materializing the full matrix.
    pub fn propagate(&self, input: &ComplexVector) -> Result<ComplexVector> {
        if input.len() != self.n() {
            return Err(CoreError::DimensionMismatch {
                expected: self.n(),
                got: input.len(),
            });
        }
        let mut field = input.clone();
        let mut index = 0;
        for tops in self.geometry.columns.iter() {
            for &p in tops {
                let t = lossy_mat2(self.params[index], self.errors[index], self.losses[index]);
                let a = field[p];
                let b = field[p + 1];
                field[p] = t[0] * a + t[1] * b;
                field[p + 1] = t[2] * a + t[3] * b;
                index += 1;
            }
        }
        for (port, &phase) in self.phase_screen.iter().enumerate() {
            field[port] *= Complex64::from_polar(1.0, phase);
        }
        Ok(field)
    }

    /// Full transfer matrix, built by propagating the n basis vectors.
    pub fn matrix(&self) -> ComplexMatrix {
        let n = self.n();
        let mut out = ComplexMatrix::zeros((n, n));
        for j in 0..n {
            let mut basis = ComplexVector::zeros(n);
            basis[j] = Complex64::new(1.0, 0.0);
            let col = self.propagate(&basis).expect("dimension is consistent");
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// Folds every theta into `[0, pi]` on an error-free mesh, compensating
    /// through phi shifts and phases pushed into the screen so the mesh
    /// matrix is unchanged.
    ///
    /// For a zero-error MZI, `T(theta, phi) = diag(e^{i theta}, -e^{i theta})
    /// . T(2 pi - theta, phi + pi)`, and the leftover diagonal commutes
    /// rightward through later MZIs by the phi push-through identity. With
    /// splitter errors present no such exact fold exists, so this requires a
    /// zero-error mesh.
    pub fn fold_thetas_canonical(&mut self) -> Result<()> {
        if !self.has_zero_errors() {
            return Err(CoreError::InvalidMesh(
                "theta folding is exact only on a zero-error mesh".into(),
            ));
        }
        let placements: Vec<Placement> = self.geometry.placements().collect();
        // chi[p]: residual phase currently sitting on wire p, to be commuted
        // toward the output.
        let mut chi = vec![0.0f64; self.n()];
        for (index, pl) in placements.iter().enumerate() {
            let p = pl.top_port;
            let theta = self.params[index].theta();
            let phi = self.params[index].phi();
            // absorb incoming wire phases into phi: T . diag(e^{i chi1}, e^{i chi2})
            // = diag(e^{i chi2}, e^{i chi2}) . T(theta, phi + chi1 - chi2)
            let phi_in = phi + chi[p] - chi[p + 1];
            let common = chi[p + 1];
            let (theta_new, phi_new, psi1, psi2) = if theta > PI {
                // fold: T(theta, phi) = diag(e^{i theta}, -e^{i theta}) . T(2pi - theta, phi + pi)
                (
                    2.0 * PI - theta,
                    phi_in + PI,
                    theta,
                    theta + PI,
                )
            } else {
                (theta, phi_in, 0.0, 0.0)
            };
            self.params[index] = MZIParams::new(theta_new, phi_new);
            chi[p] = common + psi1;
            chi[p + 1] = common + psi2;
        }
        for port in 0..self.n() {
            self.phase_screen[port] = wrap_angle(self.phase_screen[port] + chi[port]);
        }
        Ok(())
    }

    pub fn to_doc(&self) -> MeshDoc {
        MeshDoc {
            n: self.n(),
            theta: self.params.iter().map(|p| p.theta()).collect(),
            phi: self.params.iter().map(|p| p.phi()).collect(),
            alpha: self.errors.iter().map(|e| e.alpha()).collect(),
            beta: self.errors.iter().map(|e| e.beta()).collect(),
            loss_top_db: self.losses.iter().map(|l| l.top_db()).collect(),
            loss_bottom_db: self.losses.iter().map(|l| l.bottom_db()).collect(),
            phase_screen: self.phase_screen.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("mesh doc serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MeshDoc = serde_json::from_str(text).map_err(|e| CoreError::Parse {
            path: "<mesh json>".into(),
            message: e.to_string(),
        })?;
        doc.into_mesh()
    }
}

/// Flat serialized form of a mesh: geometry size plus per-MZI arrays in
/// geometry index order. JSON round trips are bit-faithful for finite
/// values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshDoc {
    pub n: usize,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub loss_top_db: Vec<f64>,
    #[serde(default)]
    pub loss_bottom_db: Vec<f64>,
    pub phase_screen: Vec<f64>,
}

impl MeshDoc {
    pub fn into_mesh(self) -> Result<MeshState> {
        let geometry = MeshGeometry::clements(self.n);
        let m = geometry.mzi_count();
        let check = |name: &str, len: usize| -> Result<()> {
            if len != m {
                return Err(CoreError::InvalidMesh(format!(
                    "{name} has {len} entries, geometry for n={} needs {m}",
                    self.n
                )));
            }
            Ok(())
        };
        check("theta", self.theta.len())?;
        check("phi", self.phi.len())?;
        check("alpha", self.alpha.len())?;
        check("beta", self.beta.len())?;
        let loss_top = if self.loss_top_db.is_empty() {
            vec![0.0; m]
        } else {
            check("loss_top_db", self.loss_top_db.len())?;
            self.loss_top_db
        };
        let loss_bottom = if self.loss_bottom_db.is_empty() {
            vec![0.0; m]
        } else {
            check("loss_bottom_db", self.loss_bottom_db.len())?;
            self.loss_bottom_db
        };
        let params = self
            .theta
            .iter()
            .zip(&self.phi)
            .map(|(&t, &p)| MZIParams::new(t, p))
            .collect();
        let errors = self
            .alpha
            .iter()
            .zip(&self.beta)
            .map(|(&a, &b)| SplitterError::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        let losses = loss_top
            .iter()
            .zip(&loss_bottom)
            .map(|(&t, &b)| ArmLoss::new(t, b))
            .collect::<Result<Vec<_>>>()?;
        MeshState::new(geometry, params, errors, losses, self.phase_screen)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_distance, identity, max_abs_diff, unitarity_error};
    use crate::mzi::faulty_mzi_transfer;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mesh(n: usize, error_scale: f64, seed: u64) -> MeshState {
        let geometry = MeshGeometry::clements(n);
        let m = geometry.mzi_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..m)
            .map(|_| MZIParams::new(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI)))
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
        let losses = vec![ArmLoss::lossless(); m];
        let screen = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        MeshState::new(geometry, params, errors, losses, screen).unwrap()
    }

    #[test]
    fn clements_geometry_counts() {
        for n in 1..=16 {
            let g = MeshGeometry::clements(n);
            assert_eq!(g.mzi_count(), n * (n - 1) / 2);
            assert_eq!(g.placements().count(), g.mzi_count());
            for (c, tops) in g.columns().iter().enumerate() {
                let expected = if c % 2 == 0 { n / 2 } else { (n - 1) / 2 };
                assert_eq!(tops.len(), expected, "n={n} column {c}");
                // no shared ports within a column
                for w in tops.windows(2) {
                    assert!(w[1] >= w[0] + 2);
                }
            }
        }
    }

    #[test]
    fn all_bar_mesh_matches_brute_force_product_n4() {
        // theta=pi, phi=0 everywhere: every MZI is diag(-1, 1); the oracle
        // builds the embedded product explicitly.
        let geometry = MeshGeometry::clements(4);
        let m = geometry.mzi_count();
        let mesh = MeshState::ideal(
            geometry.clone(),
            vec![MZIParams::new(PI, 0.0); m],
            vec![0.0; 4],
        )
        .unwrap();

        let mut oracle = identity(4);
        for pl in geometry.placements() {
            let mut factor = identity(4);
            let block = faulty_mzi_transfer(MZIParams::new(PI, 0.0), SplitterError::zero());
            let p = pl.top_port;
            factor[(p, p)] = block[(0, 0)];
            factor[(p, p + 1)] = block[(0, 1)];
            factor[(p + 1, p)] = block[(1, 0)];
            factor[(p + 1, p + 1)] = block[(1, 1)];
            oracle = factor.dot(&oracle);
        }
        let got = mesh.matrix();
        assert!(max_abs_diff(&got, &oracle) < 1e-13);
        // diagonal with +-1 entries
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    assert!((got[(i, j)].norm() - 1.0).abs() < 1e-13);
                    assert!(got[(i, j)].im.abs() < 1e-13);
                } else {
                    assert!(got[(i, j)].norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn mesh_with_any_errors_is_unitary_when_lossless() {
        for n in [2, 3, 5, 8, 16] {
            let mesh = random_mesh(n, 0.4, 100 + n as u64);
            assert!(
                unitarity_error(&mesh.matrix()) < 1e-12,
                "n={n} unitarity violated"
            );
        }
    }

    #[test]
    fn single_mzi_mesh_equals_faulty_transfer_with_screen() {
        let mesh = random_mesh(2, 0.3, 7);
        let block = faulty_mzi_transfer(mesh.params()[0], mesh.errors()[0]);
        let d0 = Complex64::from_polar(1.0, mesh.phase_screen()[0]);
        let d1 = Complex64::from_polar(1.0, mesh.phase_screen()[1]);
        let mut expected = block.clone();
        expected[(0, 0)] *= d0;
        expected[(0, 1)] *= d0;
        expected[(1, 0)] *= d1;
        expected[(1, 1)] *= d1;
        assert!(max_abs_diff(&mesh.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn propagate_matches_matrix_vector_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 8, 13] {
            let mesh = random_mesh(n, 0.3, 200 + n as u64);
            let x = ComplexVector::from_shape_fn(n, |_| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let via_propagate = mesh.propagate(&x).unwrap();
            let via_matrix = mesh.matrix().dot(&x);
            let num: f64 = (&via_propagate - &via_matrix)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt();
            let den: f64 = via_matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(num / den < 1e-12);

            // unitarity preserves the norm
            let in_norm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let out_norm: f64 = via_propagate.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((in_norm - out_norm).abs() < 1e-12 * in_norm.max(1.0));
        }
    }

    #[test]
    fn propagate_zero_is_zero_and_rejects_bad_dims() {
        let mesh = random_mesh(4, 0.2, 3);
        let zero = ComplexVector::zeros(4);
        let out = mesh.propagate(&zero).unwrap();
        assert!(out.iter().all(|z| z.norm() == 0.0));
        assert!(mesh.propagate(&ComplexVector::zeros(5)).is_err());
    }

    #[test]
    fn fold_thetas_preserves_matrix_and_lands_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2, 4, 7, 10] {
            let geometry = MeshGeometry::clements(n);
            let m = geometry.mzi_count();
            let params = (0..m)
                .map(|_| {
                    MZIParams::new(
                        rng.random_range(0.0..2.0 * PI),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let screen = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let mut mesh = MeshState::ideal(geometry, params, screen).unwrap();
            let before = mesh.matrix();
            mesh.fold_thetas_canonical().unwrap();
            let after = mesh.matrix();
            assert!(frobenius_distance(&before, &after) < 1e-11, "n={n}");
            for p in mesh.params() {
                assert!(p.theta() <= PI + 1e-12, "theta {} out of range", p.theta());
            }
        }
    }

    #[test]
    fn fold_rejects_faulty_mesh() {
        let mut mesh = random_mesh(4, 0.2, 5);
        assert!(mesh.fold_thetas_canonical().is_err());
    }

    #[test]
    fn mesh_doc_round_trip_is_bit_faithful() {
        let mut mesh = random_mesh(5, 0.3, 9);
        mesh.set_losses(vec![ArmLoss::new(0.01, 0.07).unwrap(); 10]).unwrap();
        let json = mesh.to_json();
        let back = MeshState::from_json(&json).unwrap();
        assert_eq!(mesh, back);
        let json2 = back.to_json();
        assert_eq!(json, json2);
    }
}
