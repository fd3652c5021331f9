//! Sweep runner: trains the scheduled models, injects per-trial faults or
//! losses, evaluates, and writes deterministic CSV records plus a JSON
//! manifest that reproduces the run byte for byte.

use onnmesh::{
    baseline_corrected, baseline_uncorrected, draw_uniform_errors, evaluate, sample_losses,
    train_direct, train_transfer, EncodedDataset, ErrorLevel, LossLevel, ONNModel, TrainConfig,
    TransferSchedule,
};
use rayon::prelude::*;
use std::io::Write;
use std::path::Path;

use crate::config::{ExperimentConfig, ScheduleConfig};
use crate::io::config_hash;
use crate::CliError;

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub level_percent: f64,
    pub seed: u64,
    pub trial: usize,
    pub phase: String,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub epochs: usize,
    pub status: String,
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub records_csv: String,
    pub summary_csv: String,
    pub manifest_json: String,
}

fn train_cfg(config: &ExperimentConfig, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: config.batch_size.unwrap_or(128),
        learning_rate: config.learning_rate.unwrap_or(1e-3),
        seed,
        ..TrainConfig::default()
    }
}

fn fault_model(
    base: &ONNModel,
    schedule: &ScheduleConfig,
    level_percent: f64,
    draw_seed: u64,
) -> Result<ONNModel, CliError> {
    match schedule {
        ScheduleConfig::Uncorrected { .. } | ScheduleConfig::Corrected { .. } => {
            let lvl = ErrorLevel::from_percent(level_percent).map_err(CliError::from_core)?;
            let errors: Vec<_> = base
                .layers
                .iter()
                .enumerate()
                .map(|(k, layer)| {
                    draw_uniform_errors(
                        layer.geometry().mzi_count(),
                        lvl.epsilon(),
                        mix(draw_seed, k as u64, 0),
                    )
                })
                .collect();
            if matches!(schedule, ScheduleConfig::Uncorrected { .. }) {
                baseline_uncorrected(base, &errors).map_err(CliError::from_core)
            } else {
                baseline_corrected(base, &errors)
                    .map(|(model, _clamped)| model)
                    .map_err(CliError::from_core)
            }
        }
        ScheduleConfig::Lossy { .. } => {
            let k = level_percent as u32;
            let mut model = base.clone();
            for (idx, layer) in model.layers.iter_mut().enumerate() {
                let losses = sample_losses(
                    layer.geometry().mzi_count(),
                    LossLevel::new(k),
                    mix(draw_seed, idx as u64, 1),
                );
                layer.set_losses(losses).map_err(CliError::from_core)?;
            }
            Ok(model)
        }
        _ => Ok(base.clone()),
    }
}

pub fn run_sweep(
    config: &ExperimentConfig,
    config_value: &serde_json::Value,
    train: &EncodedDataset,
    test: &EncodedDataset,
) -> Result<SweepOutput, CliError> {
    let n = config.task.fourier_side * config.task.fourier_side;
    let mut records: Vec<SweepRecord> = Vec::new();

    match &config.schedule {
        ScheduleConfig::Direct { epochs } => {
            // one independent maximally faulty model per (seed, level)
            let jobs: Vec<(usize, u64, f64)> = config
                .levels_percent
                .iter()
                .enumerate()
                .flat_map(|(li, &level)| config.seeds.iter().map(move |&s| (li, s, level)))
                .collect();
            let results: Vec<SweepRecord> = jobs
                .par_iter()
                .map(|&(li, seed, level)| {
                    let cfg = train_cfg(config, *epochs, mix(seed, li as u64, 7));
                    let run = ErrorLevel::from_percent(level)
                        .and_then(|lvl| train_direct(n, config.layers, lvl, &cfg, train, None));
                    match run.and_then(|r| evaluate(&r.model, test).map(|a| (r, a))) {
                        Ok((r, accuracy)) => SweepRecord {
                            level_percent: level,
                            seed,
                            trial: 0,
                            phase: "direct".into(),
                            accuracy: Some(accuracy),
                            loss: r.history.last().map(|h| h.mean_loss),
                            epochs: *epochs,
                            status: "ok".into(),
                        },
                        Err(e) => SweepRecord {
                            level_percent: level,
                            seed,
                            trial: 0,
                            phase: "direct".into(),
                            accuracy: None,
                            loss: None,
                            epochs: *epochs,
                            status: format!("failed: {e}"),
                        },
                    }
                })
                .collect();
            records.extend(results);
        }
        ScheduleConfig::Transfer {
            initial_epochs,
            epochs_per_step,
        } => {
            let schedule = TransferSchedule {
                initial_epochs: *initial_epochs,
                epochs_per_step: *epochs_per_step,
            };
            let results: Vec<Vec<SweepRecord>> = config
                .seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = train_cfg(config, *initial_epochs, seed);
                    match train_transfer(n, config.layers, &schedule, &cfg, train, None) {
                        Ok(run) => run
                            .models
                            .iter()
                            .map(|(level, model)| {
                                let accuracy = evaluate(model, test).ok();
                                SweepRecord {
                                    level_percent: *level,
                                    seed,
                                    trial: 0,
                                    phase: "transfer".into(),
                                    accuracy,
                                    loss: None,
                                    epochs: schedule.total_epochs(),
                                    status: if accuracy.is_some() {
                                        "ok".into()
                                    } else {
                                        "failed: evaluation".into()
                                    },
                                }
                            })
                            .collect(),
                        Err(e) => vec![SweepRecord {
                            level_percent: 0.0,
                            seed,
                            trial: 0,
                            phase: "transfer".into(),
                            accuracy: None,
                            loss: None,
                            epochs: schedule.total_epochs(),
                            status: format!("failed: {e}"),
                        }],
                    }
                })
                .collect();
            for r in results {
                records.extend(r);
            }
        }
        ScheduleConfig::Uncorrected { epochs }
        | ScheduleConfig::Corrected { epochs }
        | ScheduleConfig::Lossy { epochs, .. } => {
            // one trained base model per seed, then per (level, trial) draws
            let base_level = match &config.schedule {
                ScheduleConfig::Lossy {
                    base_level_percent, ..
                } => *base_level_percent,
                _ => 0.0,
            };
            let bases: Vec<(u64, Result<ONNModel, CliError>)> = config
                .seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = train_cfg(config, *epochs, seed);
                    let run = ErrorLevel::from_percent(base_level)
                        .and_then(|lvl| train_direct(n, config.layers, lvl, &cfg, train, None))
                        .map(|r| r.model)
                        .map_err(CliError::from_core);
                    (seed, run)
                })
                .collect();
            let phase = config.schedule.phase_tag().to_string();
            let jobs: Vec<(usize, f64, usize, usize)> = config
                .levels_percent
                .iter()
                .enumerate()
                .flat_map(|(li, &level)| {
                    (0..config.seeds.len()).flat_map(move |si| {
                        (0..config.trials).map(move |t| (li, level, si, t))
                    })
                })
                .collect();
            let results: Vec<SweepRecord> = jobs
                .par_iter()
                .map(|&(li, level, si, trial)| {
                    let seed = config.seeds[si];
                    let record = |accuracy: Option<f64>, status: String| SweepRecord {
                        level_percent: level,
                        seed,
                        trial,
                        phase: phase.clone(),
                        accuracy,
                        loss: None,
                        epochs: *epochs,
                        status,
                    };
                    match &bases[si].1 {
                        Ok(base) => {
                            let draw_seed = mix(seed, li as u64 + 1, trial as u64 + 1);
                            match fault_model(base, &config.schedule, level, draw_seed)
                                .and_then(|m| evaluate(&m, test).map_err(CliError::from_core))
                            {
                                Ok(accuracy) => record(Some(accuracy), "ok".into()),
                                Err(e) => record(None, format!("failed: {e}")),
                            }
                        }
                        Err(e) => record(None, format!("failed: base model: {e}")),
                    }
                })
                .collect();
            records.extend(results);
        }
    }

    // deterministic ordering regardless of worker completion order
    records.sort_by(|a, b| {
        a.level_percent
            .partial_cmp(&b.level_percent)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
            .then(a.trial.cmp(&b.trial))
            .then(a.phase.cmp(&b.phase))
    });

    let hash = config_hash(config_value);
    let records_csv = render_records_csv(&records, &hash);
    let summary_csv = render_summary_csv(&records, &hash);
    let manifest = serde_json::json!({
        "version": 1,
        "tool": { "name": "onnmesh", "version": env!("CARGO_PKG_VERSION") },
        "config_hash": hash,
        "config": config_value,
        "outputs": { "records": "records.csv", "summary": "summary.csv" },
    });
    Ok(SweepOutput {
        records,
        records_csv,
        summary_csv,
        manifest_json: serde_json::to_string_pretty(&manifest).expect("serializes"),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_records_csv(records: &[SweepRecord], hash: &str) -> String {
    let mut out = format!("# onnmesh-sweep v1 config_hash={hash}\n");
    out.push_str("level_percent,seed,trial,phase,accuracy,loss,epochs,status\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level_percent,
            r.seed,
            r.trial,
            r.phase,
            fmt_opt(r.accuracy),
            fmt_opt(r.loss),
            r.epochs,
            r.status
        ));
    }
    out
}

/// Lower-interpolation quantile: the element at index `floor(q * (len-1))`
/// of the sorted values.
pub fn quantile_lower(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx]
}

fn render_summary_csv(records: &[SweepRecord], hash: &str) -> String {
    let mut out = format!("# onnmesh-sweep-summary v1 config_hash={hash}\n");
    out.push_str("level_percent,phase,count,median,q1,q3\n");
    let mut keys: Vec<(f64, String)> = records
        .iter()
        .map(|r| (r.level_percent, r.phase.clone()))
        .collect();
    keys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    keys.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    for (level, phase) in keys {
        let mut values: Vec<f64> = records
            .iter()
            .filter(|r| r.level_percent == level && r.phase == phase)
            .filter_map(|r| r.accuracy)
            .collect();
        if values.is_empty() {
            continue;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            level,
            phase,
            values.len(),
            quantile_lower(&values, 0.5),
            quantile_lower(&values, 0.25),
            quantile_lower(&values, 0.75),
        ));
    }
    out
}

pub fn write_outputs(output: &SweepOutput, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let write = |name: &str, body: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        file.write_all(body.as_bytes())
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    };
    write("records.csv", &output.records_csv)?;
    write("summary.csv", &output.summary_csv)?;
    write("manifest.json", &output.manifest_json)
}
