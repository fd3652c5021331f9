//! Command-line driver: unitary decomposition, mesh transfer,
//! self-configuration, training runs and fault-injection sweeps.

use clap::{Parser, Subcommand};
use onnmesh_cli::{config, io, sweep, CliError};
use onnmesh::{
    clements_decompose, evaluate, load_idx, self_configure, train_direct, train_transfer,
    transfer_mesh, write_encoded, BlackBoxMesh, EncodedDataset, ErrorLevel, MeshState,
    NullingConfig, ONNModel, TrainConfig, TransferSchedule,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{ExperimentConfig, ScheduleConfig};

#[derive(Parser)]
#[command(
    name = "onnmesh",
    about = "Simulate, correct, transfer, self-configure and train MZI-mesh optical neural networks",
    version
)]
struct Cli {
    /// Offset applied (XOR) to every seed drawn from a config file.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Validate inputs and print the plan without computing.
    #[arg(long, global = true, default_value_t = false)]
    dry_run: bool,
    /// Output file or directory, overriding config/defaults.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a unitary matrix file into an ideal mesh file.
    Decompose {
        /// JSON matrix file ({"n": .., "elements": [[[re, im], ..], ..]}).
        matrix: PathBuf,
    },
    /// Transfer a mesh onto different splitter errors, exactly.
    Transfer {
        /// Source mesh JSON file.
        src: PathBuf,
        /// Destination per-MZI errors ({"alpha": [..], "beta": [..]}).
        dst_errors: PathBuf,
    },
    /// Program a target unitary into a serialized hidden mesh (test mode).
    Selfconfig {
        /// Target unitary matrix JSON file.
        target: PathBuf,
        /// Hidden mesh JSON file acting as the black box.
        hidden: PathBuf,
    },
    /// Train models according to an experiment config.
    Train {
        /// Experiment config JSON.
        config: PathBuf,
    },
    /// Run a fault-injection sweep according to an experiment config.
    Sweep {
        /// Experiment config JSON (or a previous manifest.json).
        config: PathBuf,
    },
    /// Evaluate a model file on an IDX test set.
    Eval {
        /// Model JSON file.
        model: PathBuf,
        /// IDX image file.
        images: PathBuf,
        /// IDX label file.
        labels: PathBuf,
        /// Side of the retained Fourier square.
        #[arg(long)]
        fourier_side: usize,
        /// Evaluate only the first N samples.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Encode an IDX dataset into the binary feature cache format.
    EncodeData {
        images: PathBuf,
        labels: PathBuf,
        #[arg(long)]
        fourier_side: usize,
        #[arg(long)]
        limit: Option<usize>,
    },
}

fn load_encoded(
    images: &Path,
    labels: &Path,
    s: usize,
    limit: Option<usize>,
) -> Result<EncodedDataset, CliError> {
    let raw = load_idx(images, labels).map_err(CliError::from_core)?;
    let raw = match limit {
        Some(k) => raw.take(k),
        None => raw,
    };
    EncodedDataset::encode(&raw, s).map_err(CliError::from_core)
}

fn cmd_decompose(matrix: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let u = io::read_matrix(matrix)?;
    let result = clements_decompose(&u).map_err(CliError::from_core)?;
    println!("decomposed {}x{} unitary: residual {:.3e}", u.nrows(), u.ncols(), result.residual);
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| matrix.with_extension("mesh.json"));
    std::fs::write(&out, result.mesh.to_json())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;
    println!("mesh written to {}", out.display());
    Ok(())
}

fn cmd_transfer(src: &Path, dst_errors: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let mesh_text = std::fs::read_to_string(src)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", src.display())))?;
    let mesh = MeshState::from_json(&mesh_text).map_err(CliError::from_core)?;
    let errors = io::read_errors(dst_errors)?;
    let transferred = transfer_mesh(&mesh, &errors).map_err(CliError::from_core)?;
    let fidelity = onnmesh::linalg::frobenius_distance(&mesh.matrix(), &transferred.matrix());
    println!("transfer complete: Frobenius deviation {fidelity:.3e}");
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| src.with_extension("transferred.json"));
    std::fs::write(&out, transferred.to_json())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;
    println!("mesh written to {}", out.display());
    Ok(())
}

fn cmd_selfconfig(target: &Path, hidden: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let u = io::read_matrix(target)?;
    let mesh_text = std::fs::read_to_string(hidden)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", hidden.display())))?;
    let mesh = MeshState::from_json(&mesh_text).map_err(CliError::from_core)?;
    let mut bb = BlackBoxMesh::new(mesh);
    let report =
        self_configure(&mut bb, &u, &NullingConfig::default()).map_err(CliError::from_core)?;
    println!(
        "self-configuration: residual {:.3e}, {} measurements, {} refinement iterations",
        report.residual, report.iterations, report.refine_iterations
    );
    if let Some(out) = out {
        std::fs::write(out, report.to_json())
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", out.display())))?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn cmd_eval(
    model: &Path,
    images: &Path,
    labels: &Path,
    s: usize,
    limit: Option<usize>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(model)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", model.display())))?;
    let model = ONNModel::from_json(&text).map_err(CliError::from_core)?;
    let data = load_encoded(images, labels, s, limit)?;
    let accuracy = evaluate(&model, &data).map_err(CliError::from_core)?;
    println!("accuracy {:.4} over {} samples", accuracy, data.len());
    Ok(())
}

fn cmd_encode(
    images: &Path,
    labels: &Path,
    s: usize,
    limit: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let data = load_encoded(images, labels, s, limit)?;
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| images.with_extension("enc"));
    write_encoded(&data, &out).map_err(CliError::from_core)?;
    println!(
        "encoded {} samples of {} features to {}",
        data.len(),
        data.feature_count(),
        out.display()
    );
    Ok(())
}

fn apply_seed_offset(config: &mut ExperimentConfig, offset: u64) {
    if offset != 0 {
        for s in config.seeds.iter_mut() {
            *s ^= offset;
        }
    }
}

fn cmd_train(
    config_path: &Path,
    out: Option<&Path>,
    seed_offset: u64,
    dry_run: bool,
) -> Result<(), CliError> {
    let (mut config, config_value) = ExperimentConfig::load(config_path)?;
    apply_seed_offset(&mut config, seed_offset);
    let hash = io::config_hash(&config_value);
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("onnmesh-train"));
    let n = config.task.fourier_side * config.task.fourier_side;
    println!(
        "train: {} layers of {n} ports, schedule {}, config hash {hash}",
        config.layers,
        config.schedule.phase_tag()
    );
    if dry_run {
        println!("dry run: config valid");
        return Ok(());
    }
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let train = load_encoded(
        &config.task.train_images,
        &config.task.train_labels,
        config.task.fourier_side,
        config.task.train_limit,
    )?;
    let test = load_encoded(
        &config.task.test_images,
        &config.task.test_labels,
        config.task.fourier_side,
        config.task.test_limit,
    )?;

    let mut history_csv = format!("# onnmesh-train v1 config_hash={hash}\n");
    history_csv.push_str("level_percent,seed,trial,phase,accuracy,loss,epochs\n");
    let write_model = |name: String, model: &ONNModel| -> Result<(), CliError> {
        let envelope = serde_json::json!({
            "config_hash": hash,
            "model": serde_json::from_str::<serde_json::Value>(&model.to_json()).unwrap(),
        });
        let path = out_dir.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(&envelope).unwrap())
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    };

    for &seed in &config.seeds {
        match &config.schedule {
            ScheduleConfig::Direct { epochs } => {
                for &level in &config.levels_percent {
                    let cfg = TrainConfig {
                        epochs: *epochs,
                        batch_size: config.batch_size.unwrap_or(128),
                        learning_rate: config.learning_rate.unwrap_or(1e-3),
                        seed,
                        ..TrainConfig::default()
                    };
                    let lvl = ErrorLevel::from_percent(level).map_err(CliError::from_core)?;
                    let run = train_direct(n, config.layers, lvl, &cfg, &train, Some(&test))
                        .map_err(CliError::from_core)?;
                    for record in &run.history {
                        history_csv.push_str(&format!(
                            "{},{},{},direct,{},{},{}\n",
                            record.level_percent,
                            seed,
                            record.epoch,
                            record.eval_accuracy.map(|a| a.to_string()).unwrap_or_default(),
                            record.mean_loss,
                            epochs
                        ));
                    }
                    write_model(format!("model-s{seed}-p{level}.json"), &run.model)?;
                }
            }
            ScheduleConfig::Transfer {
                initial_epochs,
                epochs_per_step,
            } => {
                let schedule = TransferSchedule {
                    initial_epochs: *initial_epochs,
                    epochs_per_step: *epochs_per_step,
                };
                let cfg = TrainConfig {
                    epochs: *initial_epochs,
                    batch_size: config.batch_size.unwrap_or(128),
                    learning_rate: config.learning_rate.unwrap_or(1e-3),
                    seed,
                    ..TrainConfig::default()
                };
                let run = train_transfer(n, config.layers, &schedule, &cfg, &train, Some(&test))
                    .map_err(CliError::from_core)?;
                for record in &run.history {
                    history_csv.push_str(&format!(
                        "{},{},{},transfer,{},{},{}\n",
                        record.level_percent,
                        seed,
                        record.epoch,
                        record.eval_accuracy.map(|a| a.to_string()).unwrap_or_default(),
                        record.mean_loss,
                        schedule.total_epochs()
                    ));
                }
                for (level, model) in &run.models {
                    write_model(format!("model-s{seed}-p{level:.2}.json"), model)?;
                }
            }
            other => {
                return Err(CliError::config(format!(
                    "train supports direct and transfer schedules; {} is a sweep mode",
                    other.phase_tag()
                )));
            }
        }
    }
    let history_path = out_dir.join("history.csv");
    std::fs::write(&history_path, history_csv)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", history_path.display())))?;
    println!("history written to {}", history_path.display());
    Ok(())
}

fn cmd_sweep(
    config_path: &Path,
    out: Option<&Path>,
    seed_offset: u64,
    dry_run: bool,
) -> Result<(), CliError> {
    let (mut config, config_value) = ExperimentConfig::load(config_path)?;
    apply_seed_offset(&mut config, seed_offset);
    let hash = io::config_hash(&config_value);
    println!(
        "sweep: mode {}, {} level(s) x {} seed(s) x {} trial(s), config hash {hash}",
        config.schedule.phase_tag(),
        config.levels_percent.len(),
        config.seeds.len(),
        config.trials
    );
    if dry_run {
        println!("dry run: config valid");
        return Ok(());
    }
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("onnmesh-sweep"));
    let train = load_encoded(
        &config.task.train_images,
        &config.task.train_labels,
        config.task.fourier_side,
        config.task.train_limit,
    )?;
    let test = load_encoded(
        &config.task.test_images,
        &config.task.test_labels,
        config.task.fourier_side,
        config.task.test_limit,
    )?;
    let output = sweep::run_sweep(&config, &config_value, &train, &test)?;
    sweep::write_outputs(&output, &out_dir)?;
    let failed = output
        .records
        .iter()
        .filter(|r| r.status != "ok")
        .count();
    println!(
        "{} records ({} failed) written to {}",
        output.records.len(),
        failed,
        out_dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Decompose { matrix } => cmd_decompose(matrix, out),
        Command::Transfer { src, dst_errors } => cmd_transfer(src, dst_errors, out),
        Command::Selfconfig { target, hidden } => cmd_selfconfig(target, hidden, out),
        Command::Train { config } => cmd_train(config, out, cli.seed, cli.dry_run),
        Command::Sweep { config } => cmd_sweep(config, out, cli.seed, cli.dry_run),
        Command::Eval {
            model,
            images,
            labels,
            fourier_side,
            limit,
        } => cmd_eval(model, images, labels, *fourier_side, *limit),
        Command::EncodeData {
            images,
            labels,
            fourier_side,
            limit,
        } => cmd_encode(images, labels, *fourier_side, *limit, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
