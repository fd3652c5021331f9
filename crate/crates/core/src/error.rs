//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

/// Errors produced by mesh construction, decomposition, correction,
/// data loading and training.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not unitary: deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("splitter error angle {value} out of range [-pi/4, pi/4]")]
    SplitterErrorOutOfRange { value: f64 },

    #[error("arm loss must be non-negative, got {value} dB")]
    NegativeLoss { value: f64 },

    #[error("error level epsilon {value} exceeds pi/8; maximally faulty meshes are only defined up to that level")]
    ErrorLevelTooLarge { value: f64 },

    #[error(
        "theta {theta:.6} is not correctable for errors (alpha={alpha:.6}, beta={beta:.6}): \
         allowed range [{lo:.6}, {hi:.6}]"
    )]
    Uncorrectable {
        theta: f64,
        alpha: f64,
        beta: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{} MZI(s) failed mesh correction; first: {}", failures.len(), format_first(failures))]
    MeshCorrection { failures: Vec<UncorrectableMzi> },

    #[error("{} MZI(s) violate the transferability condition; indices {:?}", violations.len(), violations)]
    NotTransferable { violations: Vec<usize> },

    #[error("IDX magic mismatch in {path}: expected {expected:#010x}, found {found:#010x}")]
    IdxMagicMismatch {
        path: String,
        expected: u32,
        found: u32,
    },

    #[error("IDX payload truncated in {path}: needed {needed} bytes, file ends at byte {offset}")]
    IdxTruncated {
        path: String,
        needed: usize,
        offset: usize,
    },

    #[error("IDX image/label count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("fourier side {s} out of range for {side}x{side} images")]
    FourierSideOutOfRange { s: usize, side: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid mesh state: {0}")]
    InvalidMesh(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

/// One MZI whose ideal theta falls outside its correctable range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncorrectableMzi {
    pub index: usize,
    pub theta: f64,
    pub lo: f64,
    pub hi: f64,
}

fn format_first(failures: &[UncorrectableMzi]) -> String {
    match failures.first() {
        Some(f) => format!(
            "index {} theta {:.6} outside [{:.6}, {:.6}]",
            f.index, f.theta, f.lo, f.hi
        ),
        None => "none".into(),
    }
}
