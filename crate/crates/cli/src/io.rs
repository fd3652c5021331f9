//! File formats owned by the command-line surface: complex matrices,
//! splitter-error assignments and the run manifest.

use num_complex::Complex64;
use onnmesh::{ComplexMatrix, SplitterError};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;

/// JSON form of a dense complex matrix: elements as `[re, im]` pairs in
/// row-major nested arrays.
#[derive(Serialize, Deserialize)]
pub struct MatrixDoc {
    pub n: usize,
    pub elements: Vec<Vec<[f64; 2]>>,
}

impl MatrixDoc {
    pub fn into_matrix(self) -> Result<ComplexMatrix, CliError> {
        if self.elements.len() != self.n || self.elements.iter().any(|row| row.len() != self.n) {
            return Err(CliError::config(format!(
                "matrix document dimensions do not match n={}",
                self.n
            )));
        }
        let mut out = ComplexMatrix::zeros((self.n, self.n));
        for (r, row) in self.elements.iter().enumerate() {
            for (c, &[re, im]) in row.iter().enumerate() {
                out[(r, c)] = Complex64::new(re, im);
            }
        }
        Ok(out)
    }
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let doc: MatrixDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("bad matrix file {}: {e}", path.display())))?;
    doc.into_matrix()
}

/// JSON form of a per-MZI splitter-error assignment.
#[derive(Serialize, Deserialize)]
pub struct ErrorsDoc {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn read_errors(path: &Path) -> Result<Vec<SplitterError>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let doc: ErrorsDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("bad errors file {}: {e}", path.display())))?;
    if doc.alpha.len() != doc.beta.len() {
        return Err(CliError::config(
            "alpha and beta arrays must have the same length".into(),
        ));
    }
    doc.alpha
        .iter()
        .zip(&doc.beta)
        .map(|(&a, &b)| SplitterError::new(a, b).map_err(CliError::from_core))
        .collect()
}

/// FNV-1a 64-bit hash of the canonical (key-sorted) JSON encoding.
pub fn config_hash(value: &serde_json::Value) -> String {
    let canonical = serde_json::to_string(value).expect("serializes");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x1000_0000_01b3);
    }
    format!("{hash:016x}")
}
