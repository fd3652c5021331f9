//! Simulator and training toolkit for optical neural networks built from
//! Mach-Zehnder interferometer (MZI) meshes.
//!
//! The crate models ideal, faulty (imbalanced beamsplitters) and lossy
//! rectangular Clements meshes, converts between unitary matrices and mesh
//! phases, corrects trained phases for hardware splitter errors in both
//! directions (ideal -> faulty and faulty -> ideal), transfers trained
//! phase sets between meshes of different fault levels, self-configures
//! black-box meshes by output nulling, and trains small mesh networks on
//! image-classification data with an exact reverse-mode gradient.

pub mod correct;
pub mod data;
pub mod decompose;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod mzi;
pub mod onn;
pub mod selfconfig;
pub mod train;

pub use correct::{
    correct_forward, correct_mesh_forward, correct_mesh_reverse, correct_reverse,
    correction_condition, error_level_from_percent, error_level_percent, is_transferable,
    make_maximally_faulty, theta_range, transfer_mesh, CorrectionResult, ErrorLevel,
};
pub use data::{
    fourier_lowpass, load_idx, read_encoded, sample_losses, write_encoded, EncodedDataset,
    LossLevel, RawDataset,
};
pub use decompose::{
    clements_decompose, givens_running_products, haar_random_unitary, DecompositionResult,
};
pub use error::{CoreError, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use mesh::{MeshGeometry, MeshState};
pub use mzi::{
    faulty_mzi_transfer, ideal_mzi_transfer, lossy_mzi_transfer, ArmLoss, MZIParams,
    SplitterError,
};
pub use onn::{Nonlinearity, ONNModel, Prediction};
pub use selfconfig::{
    null_output, self_configure, single_port_probes, BlackBoxMesh, NullingConfig,
    SelfConfigReport,
};
pub use train::{
    adam_step, adam_update_flat, baseline_corrected, baseline_uncorrected, draw_uniform_errors,
    evaluate, gradient, init_model, monotone_envelope, train_direct, train_transfer, AdamState,
    GradientSet, TrainConfig, TrainRun, TransferRun, TransferSchedule,
};
