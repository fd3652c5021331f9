//! Gradient-based training of mesh networks: exact reverse-mode gradients
//! of the cross-entropy loss with respect to every theta, phi and screen
//! phase, an Adam optimizer, direct and transfer training schedules,
//! error-draw baselines and evaluation helpers.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::correct::{
    correct_mesh_forward_clamped, make_maximally_faulty, ErrorLevel,
};
use crate::data::EncodedDataset;
use crate::decompose::{clements_decompose, haar_random_unitary};
use crate::error::{CoreError, Result};
use crate::linalg::ComplexVector;
use crate::mesh::{MeshState, Placement};
use crate::mzi::{lossy_mat2, mzi_matrix_derivatives, Mat2, MZIParams, SplitterError};
use crate::onn::{softmax, Nonlinearity, ONNModel, POWER_FLOOR};

/// Gradients aligned with one model's trainable parameters. Splitter
/// errors and losses are fixed, never trained.
#[derive(Clone, Debug)]
pub struct GradientSet {
    pub layers: Vec<LayerGradients>,
}

#[derive(Clone, Debug)]
pub struct LayerGradients {
    pub d_theta: Vec<f64>,
    pub d_phi: Vec<f64>,
    pub d_screen: Vec<f64>,
}

impl GradientSet {
    fn zeros_like(model: &ONNModel) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| LayerGradients {
                d_theta: vec![0.0; l.params().len()],
                d_phi: vec![0.0; l.params().len()],
                d_screen: vec![0.0; l.n()],
            })
            .collect();
        Self { layers }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.d_theta);
            out.extend_from_slice(&l.d_phi);
            out.extend_from_slice(&l.d_screen);
        }
        out
    }
}

/// Flattened trainable parameters of a model, ordered per layer as all
/// thetas, all phis, then the screen phases.
pub fn model_params_flat(model: &ONNModel) -> Vec<f64> {
    let mut out = Vec::new();
    for l in &model.layers {
        out.extend(l.params().iter().map(|p| p.theta()));
        out.extend(l.params().iter().map(|p| p.phi()));
        out.extend_from_slice(l.phase_screen());
    }
    out
}

/// Writes a flat parameter vector back into the model.
pub fn set_model_params_flat(model: &mut ONNModel, flat: &[f64]) {
    let mut k = 0;
    for l in model.layers.iter_mut() {
        let m = l.params().len();
        let n = l.n();
        for i in 0..m {
            let theta = flat[k + i];
            let phi = flat[k + m + i];
            l.set_params(i, MZIParams::new(theta, phi));
        }
        k += 2 * m;
        for p in 0..n {
            l.set_phase_screen(p, flat[k + p]);
        }
        k += n;
    }
}

struct LayerCache {
    placements: Vec<Placement>,
    blocks: Vec<Mat2>,
    d_theta: Vec<Mat2>,
    d_phi: Vec<Mat2>,
    screen: Vec<Complex64>,
}

fn build_layer_cache(mesh: &MeshState) -> LayerCache {
    let placements: Vec<Placement> = mesh.geometry().placements().collect();
    let mut blocks = Vec::with_capacity(placements.len());
    let mut d_theta = Vec::with_capacity(placements.len());
    let mut d_phi = Vec::with_capacity(placements.len());
    for i in 0..placements.len() {
        blocks.push(lossy_mat2(mesh.params()[i], mesh.errors()[i], mesh.losses()[i]));
        let (dt, dp) = mzi_matrix_derivatives(mesh.params()[i], mesh.errors()[i], mesh.losses()[i]);
        d_theta.push(dt);
        d_phi.push(dp);
    }
    let screen = mesh
        .phase_screen()
        .iter()
        .map(|&d| Complex64::from_polar(1.0, d))
        .collect();
    LayerCache {
        placements,
        blocks,
        d_theta,
        d_phi,
        screen,
    }
}

/// Exact gradient of the mean cross-entropy of a batch with respect to all
/// trainable parameters, by reverse-mode accumulation through the layered
/// mesh structure. Matches central finite differences.
pub fn gradient(model: &ONNModel, inputs: &[ComplexVector], labels: &[u8]) -> Result<GradientSet> {
    if inputs.is_empty() {
        return Err(CoreError::EmptyBatch);
    }
    let caches: Vec<LayerCache> = model.layers.iter().map(build_layer_cache).collect();
    let mut grads = GradientSet::zeros_like(model);
    let layer_count = model.layers.len();
    let scale = 1.0 / inputs.len() as f64;

    // per-sample buffers reused across the batch
    let mut mzi_inputs: Vec<Vec<(Complex64, Complex64)>> = caches
        .iter()
        .map(|c| vec![(Complex64::default(), Complex64::default()); c.placements.len()])
        .collect();
    let mut pre_activation: Vec<ComplexVector> =
        (0..layer_count).map(|_| ComplexVector::zeros(model.n())).collect();
    let mut post_screen: Vec<ComplexVector> =
        (0..layer_count).map(|_| ComplexVector::zeros(model.n())).collect();

    for (x, &label) in inputs.iter().zip(labels) {
        if x.len() != model.n() {
            return Err(CoreError::DimensionMismatch {
                expected: model.n(),
                got: x.len(),
            });
        }
        // forward, recording each MZI's local input pair
        let mut field = x.clone();
        for (k, cache) in caches.iter().enumerate() {
            for (i, pl) in cache.placements.iter().enumerate() {
                let p = pl.top_port;
                let a = field[p];
                let b = field[p + 1];
                mzi_inputs[k][i] = (a, b);
                let t = &cache.blocks[i];
                field[p] = t[0] * a + t[1] * b;
                field[p + 1] = t[2] * a + t[3] * b;
            }
            for (port, &d) in cache.screen.iter().enumerate() {
                field[port] *= d;
            }
            post_screen[k] = field.clone();
            if k + 1 < layer_count {
                pre_activation[k] = field.clone();
                field = model.nonlinearity.apply_vec(&field);
            }
        }

        // loss cotangent at the final output: p_j = |z_j|^2,
        // dL/d logit_j = softmax_j - [j == label]
        let output = &post_screen[layer_count - 1];
        let logits: Vec<f64> = output
            .iter()
            .take(model.readout)
            .map(|z| (z.norm_sqr() + POWER_FLOOR).ln())
            .collect();
        let probs = softmax(&logits);
        let mut adj = ComplexVector::zeros(model.n());
        for j in 0..model.readout {
            let dl_dlogit = probs[j] - if j == label as usize { 1.0 } else { 0.0 };
            let dl_dpower = dl_dlogit / (output[j].norm_sqr() + POWER_FLOOR);
            adj[j] = output[j] * (2.0 * dl_dpower * scale);
        }

        // backward through the layers
        for k in (0..layer_count).rev() {
            let cache = &caches[k];
            if k + 1 < layer_count {
                // pull back through the nonlinearity applied after layer k
                adj = model.nonlinearity.backward_vec(&pre_activation[k], &adj);
            }
            // screen: y = e^{i delta} w; dL/d delta = Re(conj(g) . i . y)
            for port in 0..model.n() {
                let y = post_screen[k][port];
                grads.layers[k].d_screen[port] +=
                    (adj[port].conj() * Complex64::new(0.0, 1.0) * y).re;
                adj[port] *= cache.screen[port].conj();
            }
            // MZIs in reverse application order
            for (i, pl) in cache.placements.iter().enumerate().rev() {
                let p = pl.top_port;
                let (a, b) = mzi_inputs[k][i];
                let ga = adj[p];
                let gb = adj[p + 1];
                let dt = &cache.d_theta[i];
                let dtv0 = dt[0] * a + dt[1] * b;
                let dtv1 = dt[2] * a + dt[3] * b;
                grads.layers[k].d_theta[i] += (ga.conj() * dtv0 + gb.conj() * dtv1).re;
                let dp = &cache.d_phi[i];
                let dpv0 = dp[0] * a + dp[1] * b;
                let dpv1 = dp[2] * a + dp[3] * b;
                grads.layers[k].d_phi[i] += (ga.conj() * dpv0 + gb.conj() * dpv1).re;
                // adjoint through the block: g_v = T^dagger g_w
                let t = &cache.blocks[i];
                adj[p] = t[0].conj() * ga + t[2].conj() * gb;
                adj[p + 1] = t[1].conj() * ga + t[3].conj() * gb;
            }
        }
    }
    Ok(grads)
}

/// Training hyperparameters. Defaults: batch 128, learning rate 1e-3,
/// Adam betas (0.9, 0.999), eps 1e-8.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

/// Adam optimizer state over the flattened parameter vector.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One Adam update with bias correction over a flat parameter vector.
pub fn adam_update_flat(params: &mut [f64], state: &mut AdamState, grads: &[f64], cfg: &TrainConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    for i in 0..params.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
}

/// One Adam update of a model's trainable phases; deterministic.
pub fn adam_step(model: &mut ONNModel, state: &mut AdamState, grads: &GradientSet, cfg: &TrainConfig) {
    let mut params = model_params_flat(model);
    adam_update_flat(&mut params, state, &grads.to_flat(), cfg);
    set_model_params_flat(model, &params);
}

/// Loss and accuracy recorded after one training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub level_percent: f64,
    pub epoch: usize,
    pub mean_loss: f64,
    pub eval_accuracy: Option<f64>,
}

/// A trained model plus its per-epoch history.
#[derive(Clone, Debug)]
pub struct TrainRun {
    pub model: ONNModel,
    pub history: Vec<EpochRecord>,
}

fn derive_seed(base: u64, tag: u64) -> u64 {
    // splitmix64 over (base, tag)
    let mut z = base
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(tag)
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fresh model at the given error level: each layer starts from the phases
/// of a Haar-random unitary's decomposition, with maximally faulty errors.
pub fn init_model(n: usize, layers: usize, lvl: ErrorLevel, seed: u64) -> Result<ONNModel> {
    let meshes = (0..layers)
        .map(|k| {
            let u = haar_random_unitary(n, derive_seed(seed, k as u64));
            let mut mesh = clements_decompose(&u)?.mesh;
            let m = mesh.geometry().mzi_count();
            mesh.set_errors(make_maximally_faulty(m, lvl))?;
            Ok(mesh)
        })
        .collect::<Result<Vec<_>>>()?;
    ONNModel::new(meshes, Nonlinearity::ModRelu { bias: 0.1 }, 10.min(n))
}

fn run_epochs(
    model: &mut ONNModel,
    cfg: &TrainConfig,
    epochs: usize,
    level_percent: f64,
    epoch_offset: usize,
    train: &EncodedDataset,
    eval: Option<&EncodedDataset>,
    history: &mut Vec<EpochRecord>,
) -> Result<()> {
    if train.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut state = AdamState::new(model_params_flat(model).len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            0x5eed_0000 + (epoch_offset + epoch) as u64,
        ));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let inputs: Vec<ComplexVector> =
                chunk.iter().map(|&i| train.features[i].clone()).collect();
            let labels: Vec<u8> = chunk.iter().map(|&i| train.labels[i]).collect();
            loss_sum += model.loss(&inputs, &labels)?;
            let grads = gradient(model, &inputs, &labels)?;
            adam_step(model, &mut state, &grads, cfg);
            batches += 1;
        }
        let eval_accuracy = match eval {
            Some(ds) => Some(evaluate(model, ds)?),
            None => None,
        };
        history.push(EpochRecord {
            level_percent,
            epoch: epoch_offset + epoch,
            mean_loss: loss_sum / batches as f64,
            eval_accuracy,
        });
    }
    Ok(())
}

/// Trains a maximally faulty model at one error level from a Haar-random
/// start. `lvl.epsilon() == 0` reduces to ideal training.
pub fn train_direct(
    n: usize,
    layers: usize,
    lvl: ErrorLevel,
    cfg: &TrainConfig,
    train: &EncodedDataset,
    eval: Option<&EncodedDataset>,
) -> Result<TrainRun> {
    let mut model = init_model(n, layers, lvl, cfg.seed)?;
    let mut history = Vec::new();
    run_epochs(
        &mut model,
        cfg,
        cfg.epochs,
        lvl.percent(),
        0,
        train,
        eval,
        &mut history,
    )?;
    Ok(TrainRun { model, history })
}

/// Transfer-training schedule: an ideal model trained for `initial_epochs`
/// is re-programmed (raw phases) onto maximally faulty meshes at 1%, 2%,
/// ... 35% and finally the terminal 35.36% level, training
/// `epochs_per_step` epochs at each step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferSchedule {
    pub initial_epochs: usize,
    pub epochs_per_step: usize,
}

/// The terminal error level percent, `100 sin(pi/4) / 2`.
pub const TERMINAL_LEVEL_PERCENT: f64 = 35.355339059327378;

impl TransferSchedule {
    /// Error levels visited after the ideal training, in percent.
    pub fn levels_percent(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = (1..=35).map(|p| p as f64).collect();
        levels.push(TERMINAL_LEVEL_PERCENT);
        levels
    }

    /// Planned (level_percent, epochs) pairs including the initial ideal
    /// training.
    pub fn epoch_plan(&self) -> Vec<(f64, usize)> {
        let mut plan = vec![(0.0, self.initial_epochs)];
        plan.extend(self.levels_percent().into_iter().map(|p| (p, self.epochs_per_step)));
        plan
    }

    pub fn total_epochs(&self) -> usize {
        self.epoch_plan().iter().map(|(_, e)| e).sum()
    }
}

/// A transfer-training chain: the model retained at every error level.
#[derive(Clone, Debug)]
pub struct TransferRun {
    /// `(level_percent, model)` pairs, starting with the ideal model at 0%.
    pub models: Vec<(f64, ONNModel)>,
    pub history: Vec<EpochRecord>,
}

/// Runs the transfer-training curriculum. Each step seeds from the raw,
/// uncorrected phases of the previous level's model.
pub fn train_transfer(
    n: usize,
    layers: usize,
    schedule: &TransferSchedule,
    cfg: &TrainConfig,
    train: &EncodedDataset,
    eval: Option<&EncodedDataset>,
) -> Result<TransferRun> {
    let mut history = Vec::new();
    let mut model = init_model(n, layers, ErrorLevel::new(0.0)?, cfg.seed)?;
    run_epochs(
        &mut model,
        cfg,
        schedule.initial_epochs,
        0.0,
        0,
        train,
        eval,
        &mut history,
    )?;
    let mut models = vec![(0.0, model.clone())];
    let mut epoch_offset = schedule.initial_epochs;
    for percent in schedule.levels_percent() {
        let lvl = ErrorLevel::from_percent(percent)?;
        // raw phase hand-off: same thetas, phis and screens, new errors
        for layer in model.layers.iter_mut() {
            let m = layer.geometry().mzi_count();
            layer.set_errors(make_maximally_faulty(m, lvl))?;
        }
        run_epochs(
            &mut model,
            cfg,
            schedule.epochs_per_step,
            percent,
            epoch_offset,
            train,
            eval,
            &mut history,
        )?;
        epoch_offset += schedule.epochs_per_step;
        models.push((percent, model.clone()));
    }
    Ok(TransferRun { models, history })
}

/// Uniform error draw in `[-eps, eps]^2` per MZI; deterministic.
pub fn draw_uniform_errors(mzi_count: usize, epsilon: f64, seed: u64) -> Vec<SplitterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mzi_count)
        .map(|_| {
            SplitterError::new(
                rng.random_range(-epsilon..=epsilon),
                rng.random_range(-epsilon..=epsilon),
            )
            .expect("epsilon <= pi/4")
        })
        .collect()
}

/// Uncorrected baseline: the ideal model's raw phases copied verbatim into
/// meshes with the given errors.
pub fn baseline_uncorrected(ideal: &ONNModel, errors_per_layer: &[Vec<SplitterError>]) -> Result<ONNModel> {
    let mut model = ideal.clone();
    for (layer, errors) in model.layers.iter_mut().zip(errors_per_layer) {
        layer.set_errors(errors.clone())?;
    }
    Ok(model)
}

/// Corrected baseline: the ideal phases are first folded to canonical
/// thetas, then forward-corrected onto the given errors; out-of-range
/// thetas clamp to the nearest realizable value. Returns the corrected
/// model and how many MZIs needed clamping.
pub fn baseline_corrected(
    ideal: &ONNModel,
    errors_per_layer: &[Vec<SplitterError>],
) -> Result<(ONNModel, usize)> {
    let mut layers = Vec::with_capacity(ideal.layers.len());
    let mut clamped_total = 0;
    for (layer, errors) in ideal.layers.iter().zip(errors_per_layer) {
        let mut canonical = layer.clone();
        canonical.fold_thetas_canonical()?;
        let (corrected, clamped) = correct_mesh_forward_clamped(&canonical, errors)?;
        clamped_total += clamped.len();
        layers.push(corrected);
    }
    Ok((
        ONNModel::new(layers, ideal.nonlinearity, ideal.readout)?,
        clamped_total,
    ))
}

/// Fraction of argmax-correct predictions over a labeled dataset.
pub fn evaluate(model: &ONNModel, dataset: &EncodedDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut correct = 0usize;
    for (x, &label) in dataset.features.iter().zip(&dataset.labels) {
        if model.forward(x)?.class == label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Assigns each error level the best accuracy achieved at the same or any
/// higher level (suffix maximum); the result is non-increasing and
/// idempotent.
pub fn monotone_envelope(curve: &[f64]) -> Vec<f64> {
    let mut out = curve.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}
