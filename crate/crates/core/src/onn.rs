//! Optical neural network composition: mesh layers interleaved with
//! elementwise nonlinearities, power readout and cross-entropy loss.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::ComplexVector;
use crate::mesh::{MeshDoc, MeshState};

/// Floor added to readout powers before taking the log, keeping logits
/// finite when an output port carries no light.
pub const POWER_FLOOR: f64 = 1e-30;

/// Complex nonlinearity applied between mesh layers.
///
/// `ModRelu` shrinks each magnitude by a threshold and zeroes fields below
/// it: `sigma(z) = (|z| - t) z / |z|` for `|z| > t`, else 0, with the
/// threshold `t = bias * ||field|| / sqrt(n)` relative to the rms field
/// amplitude. The relative threshold makes predictions invariant under a
/// common attenuation of the whole field, so uniform propagation loss does
/// not disturb the readout. `EoActivation` is a pluggable extension point
/// for an electro-optic response curve; it is not used by the built-in
/// experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Identity,
    ModRelu { bias: f64 },
    EoActivation { alpha: f64, gain: f64, phase_bias: f64 },
}

impl Nonlinearity {
    /// Per-sample threshold of the relative-bias ModRelu.
    fn modrelu_threshold(bias: f64, field: &crate::linalg::ComplexVector) -> f64 {
        let norm: f64 = field.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        bias * norm / (field.len() as f64).sqrt()
    }

    pub fn apply_vec(&self, field: &crate::linalg::ComplexVector) -> crate::linalg::ComplexVector {
        match *self {
            Nonlinearity::Identity => field.clone(),
            Nonlinearity::ModRelu { bias } => {
                let t = Self::modrelu_threshold(bias, field);
                field.mapv(|z| {
                    let r = z.norm();
                    if r > t {
                        z * ((r - t) / r)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            }
            Nonlinearity::EoActivation { alpha, gain, phase_bias } => field.mapv(|z| {
                // saturable phase response: amplitude-dependent phase and gain
                let phase = phase_bias + alpha * z.norm_sqr();
                z * gain * Complex64::from_polar(1.0, phase)
            }),
        }
    }

    /// Cotangent pullback: given the pre-activation field and the adjoint
    /// of the activated field, returns the adjoint of the pre-activation
    /// field.
    pub fn backward_vec(
        &self,
        field: &crate::linalg::ComplexVector,
        adjoint: &crate::linalg::ComplexVector,
    ) -> crate::linalg::ComplexVector {
        match *self {
            Nonlinearity::Identity => adjoint.clone(),
            Nonlinearity::ModRelu { bias } => {
                let norm: f64 = field.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let t = Self::modrelu_threshold(bias, field);
                let mut out = crate::linalg::ComplexVector::zeros(field.len());
                // direct terms, threshold held fixed
                let mut dl_dt = 0.0;
                for (k, (&z, &g)) in field.iter().zip(adjoint.iter()).enumerate() {
                    let r = z.norm();
                    if r > t {
                        let gz_real = (g.conj() * z).re;
                        out[k] = g * (1.0 - t / r) + z * (t / (r * r * r) * gz_real);
                        // d sigma_k / dt = -z_k / |z_k|
                        dl_dt -= (g.conj() * z).re / r;
                    }
                }
                // threshold variation: t = bias * ||z|| / sqrt(n),
                // d||z|| = Re(conj(z) dz) / ||z||
                if norm > 0.0 {
                    let coeff = dl_dt * bias / ((field.len() as f64).sqrt() * norm);
                    for (k, &z) in field.iter().enumerate() {
                        out[k] += z * coeff;
                    }
                }
                out
            }
            Nonlinearity::EoActivation { alpha, gain, phase_bias } => {
                let mut out = crate::linalg::ComplexVector::zeros(field.len());
                for (k, (&z, &g)) in field.iter().zip(adjoint.iter()).enumerate() {
                    let r2 = z.norm_sqr();
                    let rot = gain * Complex64::from_polar(1.0, phase_bias + alpha * r2);
                    let grot = (g.conj() * (Complex64::new(0.0, 1.0) * z * rot)).re;
                    out[k] = g * rot.conj() + z * (2.0 * alpha * grot);
                }
                out
            }
        }
    }
}

/// Ordered mesh layers with a nonlinearity between consecutive layers (none
/// after the last) and a label readout on the first `readout` output ports.
#[derive(Clone, Debug, PartialEq)]
pub struct ONNModel {
    pub layers: Vec<MeshState>,
    pub nonlinearity: Nonlinearity,
    pub readout: usize,
}

/// Class scores for one input.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub class: usize,
}

/// Per-layer fields retained by a forward pass for gradient computation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input field of each layer (after the previous nonlinearity).
    pub layer_inputs: Vec<ComplexVector>,
    /// Mesh output of each layer (before the following nonlinearity).
    pub layer_outputs: Vec<ComplexVector>,
    /// Final output field.
    pub output: ComplexVector,
}

impl ONNModel {
    pub fn new(layers: Vec<MeshState>, nonlinearity: Nonlinearity, readout: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::InvalidMesh("a model needs at least one layer".into()));
        }
        let n = layers[0].n();
        if layers.iter().any(|l| l.n() != n) {
            return Err(CoreError::InvalidMesh(
                "all layers must share one port count".into(),
            ));
        }
        if readout > n {
            return Err(CoreError::InvalidMesh(format!(
                "readout {readout} exceeds port count {n}"
            )));
        }
        Ok(Self {
            layers,
            nonlinearity,
            readout,
        })
    }

    pub fn n(&self) -> usize {
        self.layers[0].n()
    }

    /// Propagates an input field through all layers, applying the
    /// nonlinearity between consecutive meshes but not after the last one.
    pub fn forward_trace(&self, x: &ComplexVector) -> Result<ForwardTrace> {
        if x.len() != self.n() {
            return Err(CoreError::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut layer_outputs = Vec::with_capacity(self.layers.len());
        let mut field = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            layer_inputs.push(field.clone());
            let out = layer.propagate(&field)?;
            layer_outputs.push(out.clone());
            field = if k + 1 < self.layers.len() {
                self.nonlinearity.apply_vec(&out)
            } else {
                out
            };
        }
        Ok(ForwardTrace {
            layer_inputs,
            layer_outputs,
            output: field,
        })
    }

    /// Logits of one input: log of the readout-port powers.
    pub fn forward(&self, x: &ComplexVector) -> Result<Prediction> {
        let trace = self.forward_trace(x)?;
        Ok(self.predict_from_output(&trace.output))
    }

    pub fn predict_from_output(&self, output: &ComplexVector) -> Prediction {
        let logits: Vec<f64> = output
            .iter()
            .take(self.readout)
            .map(|z| (z.norm_sqr() + POWER_FLOOR).ln())
            .collect();
        let class = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
            .map(|(i, _)| i)
            .unwrap_or(0);
        Prediction { logits, class }
    }

    /// Mean softmax cross-entropy over a batch of (input, label) pairs.
    pub fn loss(&self, inputs: &[ComplexVector], labels: &[u8]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(CoreError::EmptyBatch);
        }
        debug_assert_eq!(inputs.len(), labels.len());
        let mut total = 0.0;
        for (x, &label) in inputs.iter().zip(labels) {
            let prediction = self.forward(x)?;
            total += cross_entropy(&prediction.logits, label as usize);
        }
        Ok(total / inputs.len() as f64)
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            nonlinearity: self.nonlinearity,
            readout: self.readout,
            layers: self.layers.iter().map(|l| l.to_doc()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("model doc serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).map_err(|e| CoreError::Parse {
            path: "<model json>".into(),
            message: e.to_string(),
        })?;
        doc.into_model()
    }
}

/// Numerically stable softmax cross-entropy of one logit vector.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}

/// Softmax probabilities of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Serialized model: mesh documents plus the nonlinearity configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelDoc {
    pub nonlinearity: Nonlinearity,
    pub readout: usize,
    pub layers: Vec<MeshDoc>,
}

impl ModelDoc {
    pub fn into_model(self) -> Result<ONNModel> {
        let layers = self
            .layers
            .into_iter()
            .map(|doc| doc.into_mesh())
            .collect::<Result<Vec<_>>>()?;
        ONNModel::new(layers, self.nonlinearity, self.readout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{clements_decompose, haar_random_unitary};
    use crate::linalg::identity;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn haar_model(n: usize, layers: usize, readout: usize, seed: u64) -> ONNModel {
        let meshes = (0..layers)
            .map(|k| {
                clements_decompose(&haar_random_unitary(n, seed + k as u64))
                    .unwrap()
                    .mesh
            })
            .collect();
        ONNModel::new(meshes, Nonlinearity::ModRelu { bias: 0.1 }, readout).unwrap()
    }

    fn random_field(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
        let mut v = ComplexVector::from_shape_fn(n, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.mapv_inplace(|z| z / norm);
        v
    }

    #[test]
    fn identity_meshes_pass_the_field_through() {
        let mesh = clements_decompose(&identity(4)).unwrap().mesh;
        let model =
            ONNModel::new(vec![mesh.clone(), mesh], Nonlinearity::Identity, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_field(4, &mut rng);
        let trace = model.forward_trace(&x).unwrap();
        let diff: f64 = (&trace.output - &x).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff < 1e-10);
    }

    #[test]
    fn unitary_layers_preserve_total_power_regardless_of_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = haar_model(6, 2, 6, 10);
        let mut layers = model.layers.clone();
        for layer in layers.iter_mut() {
            let errors = (0..layer.geometry().mzi_count())
                .map(|_| {
                    crate::mzi::SplitterError::new(
                        rng.random_range(-0.3..0.3),
                        rng.random_range(-0.3..0.3),
                    )
                    .unwrap()
                })
                .collect();
            layer.set_errors(errors).unwrap();
        }
        let model_linear = ONNModel::new(layers, Nonlinearity::Identity, 6).unwrap();
        let x = random_field(6, &mut rng);
        let trace = model_linear.forward_trace(&x).unwrap();
        let power: f64 = trace.output.iter().map(|z| z.norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logits_match_dense_matrix_oracle() {
        // fixed 4-port, 2-layer model with identity nonlinearity; the
        // oracle multiplies dense mesh matrices directly
        let model = {
            let meshes = vec![
                clements_decompose(&haar_random_unitary(4, 3)).unwrap().mesh,
                clements_decompose(&haar_random_unitary(4, 4)).unwrap().mesh,
            ];
            ONNModel::new(meshes, Nonlinearity::Identity, 4).unwrap()
        };
        let mut basis = ComplexVector::zeros(4);
        basis[1] = Complex64::new(1.0, 0.0);
        let prediction = model.forward(&basis).unwrap();

        let product = model.layers[1].matrix().dot(&model.layers[0].matrix());
        let field = product.dot(&basis);
        for (j, logit) in prediction.logits.iter().enumerate() {
            let expected = (field[j].norm_sqr() + POWER_FLOOR).ln();
            assert!((logit - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_logits_give_ln10_loss() {
        let logits = vec![0.7; 10];
        assert!((cross_entropy(&logits, 4) - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dominant_logit_drives_loss_to_zero() {
        let mut logits = vec![0.0; 10];
        logits[2] = 40.0;
        assert!(cross_entropy(&logits, 2) < 1e-12);
    }

    #[test]
    fn batch_loss_matches_independent_oracle() {
        let model = haar_model(5, 2, 5, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<ComplexVector> = (0..4).map(|_| random_field(5, &mut rng)).collect();
        let labels = vec![0u8, 1, 2, 3];
        let loss = model.loss(&inputs, &labels).unwrap();

        // oracle: softmax cross-entropy computed from scratch
        let mut expected = 0.0;
        for (x, &y) in inputs.iter().zip(&labels) {
            let logits = model.forward(x).unwrap().logits;
            let probs = softmax(&logits);
            expected += -(probs[y as usize]).ln();
        }
        expected /= inputs.len() as f64;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let model = haar_model(4, 1, 4, 30);
        assert!(model.loss(&[], &[]).is_err());
    }

    #[test]
    fn model_json_round_trips() {
        let model = haar_model(4, 2, 4, 40);
        let json = model.to_json();
        let back = ONNModel::from_json(&json).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn modrelu_zeroes_small_fields_and_is_scale_equivariant() {
        let nl = Nonlinearity::ModRelu { bias: 0.5 };
        let field = ComplexVector::from_vec(vec![
            Complex64::new(0.05, 0.0),
            Complex64::new(0.0, 2.0),
        ]);
        let out = nl.apply_vec(&field);
        // threshold = 0.5 * ||z|| / sqrt(2) ~ 0.707; the small component dies
        assert_eq!(out[0], Complex64::new(0.0, 0.0));
        assert!(out[1].norm() > 0.0);
        // scaling the field scales the output by the same factor
        let scaled = nl.apply_vec(&field.mapv(|z| z * 0.37));
        for k in 0..2 {
            assert!((scaled[k] - out[k] * 0.37).norm() < 1e-14);
        }
    }
}
