//! Dataset ingestion and preprocessing: IDX container parsing, 2-D Fourier
//! low-pass encoding of images into complex feature vectors, encoded-set
//! caching and the Gaussian arm-loss model.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::linalg::ComplexVector;
use crate::mzi::ArmLoss;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803; // 2051
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801; // 2049

/// Raw image dataset: unsigned byte images plus class labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major per image.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let pixels = self.rows * self.cols;
        &self.images[index * pixels..(index + 1) * pixels]
    }

    /// First `count` samples.
    pub fn take(&self, count: usize) -> RawDataset {
        let count = count.min(self.len());
        let pixels = self.rows * self.cols;
        RawDataset {
            rows: self.rows,
            cols: self.cols,
            images: self.images[..count * pixels].to_vec(),
            labels: self.labels[..count].to_vec(),
        }
    }

    /// Re-serializes into IDX byte streams; the inverse of [`load_idx`].
    pub fn to_idx_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        let mut images = Vec::with_capacity(16 + self.images.len());
        images.extend_from_slice(&IDX_IMAGE_MAGIC.to_be_bytes());
        images.extend_from_slice(&(self.len() as u32).to_be_bytes());
        images.extend_from_slice(&(self.rows as u32).to_be_bytes());
        images.extend_from_slice(&(self.cols as u32).to_be_bytes());
        images.extend_from_slice(&self.images);
        let mut labels = Vec::with_capacity(8 + self.labels.len());
        labels.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
        labels.extend_from_slice(&(self.len() as u32).to_be_bytes());
        labels.extend_from_slice(&self.labels);
        (images, labels)
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(CoreError::IdxTruncated {
            path: path.into(),
            needed: end,
            offset: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Parses a big-endian IDX image/label file pair.
pub fn load_idx_bytes(
    image_bytes: &[u8],
    label_bytes: &[u8],
    image_path: &str,
    label_path: &str,
) -> Result<RawDataset> {
    let magic = read_be_u32(image_bytes, 0, image_path)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(CoreError::IdxMagicMismatch {
            path: image_path.into(),
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_be_u32(image_bytes, 4, image_path)? as usize;
    let rows = read_be_u32(image_bytes, 8, image_path)? as usize;
    let cols = read_be_u32(image_bytes, 12, image_path)? as usize;
    let needed = 16 + count * rows * cols;
    if image_bytes.len() < needed {
        return Err(CoreError::IdxTruncated {
            path: image_path.into(),
            needed,
            offset: image_bytes.len(),
        });
    }

    let label_magic = read_be_u32(label_bytes, 0, label_path)?;
    if label_magic != IDX_LABEL_MAGIC {
        return Err(CoreError::IdxMagicMismatch {
            path: label_path.into(),
            expected: IDX_LABEL_MAGIC,
            found: label_magic,
        });
    }
    let label_count = read_be_u32(label_bytes, 4, label_path)? as usize;
    if label_count != count {
        return Err(CoreError::IdxCountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let label_needed = 8 + count;
    if label_bytes.len() < label_needed {
        return Err(CoreError::IdxTruncated {
            path: label_path.into(),
            needed: label_needed,
            offset: label_bytes.len(),
        });
    }

    Ok(RawDataset {
        rows,
        cols,
        images: image_bytes[16..needed].to_vec(),
        labels: label_bytes[8..label_needed].to_vec(),
    })
}

/// Loads an IDX image/label file pair from disk.
pub fn load_idx(path_images: &Path, path_labels: &Path) -> Result<RawDataset> {
    let images = std::fs::read(path_images)
        .map_err(|e| CoreError::io(path_images.display().to_string(), e))?;
    let labels = std::fs::read(path_labels)
        .map_err(|e| CoreError::io(path_labels.display().to_string(), e))?;
    load_idx_bytes(
        &images,
        &labels,
        &path_images.display().to_string(),
        &path_labels.display().to_string(),
    )
}

/// Centered 2-D DFT of a square image, computed row-column (two 1-D
/// passes). Bin `(u, v)` of the result holds frequency
/// `(u - side/2, v - side/2)`.
fn centered_dft(image: &[u8], side: usize) -> Vec<Complex64> {
    let twiddle: Vec<Complex64> = (0..side)
        .map(|k| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (k as f64) / side as f64))
        .collect();
    // rows pass: transform along columns index c, for each row r
    let mut rows_out = vec![Complex64::new(0.0, 0.0); side * side];
    for r in 0..side {
        for fv in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..side {
                acc += twiddle[(fv * c) % side] * (image[r * side + c] as f64);
            }
            rows_out[r * side + fv] = acc;
        }
    }
    // columns pass
    let mut out = vec![Complex64::new(0.0, 0.0); side * side];
    for fv in 0..side {
        for fu in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..side {
                acc += twiddle[(fu * r) % side] * rows_out[r * side + fv];
            }
            // shift so that zero frequency sits at (side/2, side/2)
            let su = (fu + side / 2) % side;
            let sv = (fv + side / 2) % side;
            out[su * side + sv] = acc;
        }
    }
    out
}

/// Low-pass encodes one square image: 2-D DFT, zero frequency centered,
/// the central `s x s` block flattened row-major and normalized to unit L2
/// norm. `s` must be even and at most the image side.
pub fn fourier_lowpass(image: &[u8], side: usize, s: usize) -> Result<ComplexVector> {
    if s == 0 || s > side || s % 2 != 0 {
        return Err(CoreError::FourierSideOutOfRange { s, side });
    }
    let spectrum = centered_dft(image, side);
    let center = side / 2;
    let lo = center - s / 2;
    let mut features = ComplexVector::zeros(s * s);
    for u in 0..s {
        for v in 0..s {
            features[u * s + v] = spectrum[(lo + u) * side + (lo + v)];
        }
    }
    let norm: f64 = features.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        features.mapv_inplace(|z| z / norm);
    }
    Ok(features)
}

/// Encoded dataset: complex feature vectors of length `s*s` plus labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub s: usize,
    pub features: Vec<ComplexVector>,
    pub labels: Vec<u8>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of complex features per sample (`s*s`), the mesh port count.
    pub fn feature_count(&self) -> usize {
        self.s * self.s
    }

    pub fn encode(raw: &RawDataset, s: usize) -> Result<Self> {
        if raw.rows != raw.cols {
            return Err(CoreError::FourierSideOutOfRange { s, side: raw.rows });
        }
        let features = (0..raw.len())
            .map(|i| fourier_lowpass(raw.image(i), raw.rows, s))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            s,
            features,
            labels: raw.labels.clone(),
        })
    }

    /// Subrange as an owned dataset.
    pub fn slice(&self, start: usize, end: usize) -> EncodedDataset {
        EncodedDataset {
            s: self.s,
            features: self.features[start..end].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }
}

const ENCODED_MAGIC: &[u8; 8] = b"ONNENC01";

/// Writes an encoded dataset as a little-endian binary cache file:
/// magic string, s, count, labels, then (re, im) f64 pairs per feature.
pub fn write_encoded(dataset: &EncodedDataset, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let mut buf = Vec::with_capacity(20 + dataset.len() * (1 + dataset.feature_count() * 16));
    buf.extend_from_slice(ENCODED_MAGIC);
    buf.extend_from_slice(&(dataset.s as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    buf.extend_from_slice(&dataset.labels);
    for f in &dataset.features {
        for z in f.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    file.write_all(&buf)
        .map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Reads an encoded dataset cache written by [`write_encoded`].
pub fn read_encoded(path: &Path) -> Result<EncodedDataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    let parse = |message: String| CoreError::Parse {
        path: path.display().to_string(),
        message,
    };
    if bytes.len() < 20 || &bytes[..8] != ENCODED_MAGIC {
        return Err(parse("bad magic or truncated header".into()));
    }
    let s = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let n = s * s;
    let needed = 20 + count + count * n * 16;
    if bytes.len() != needed {
        return Err(parse(format!(
            "expected {needed} bytes for {count} samples, found {}",
            bytes.len()
        )));
    }
    let labels = bytes[20..20 + count].to_vec();
    let mut offset = 20 + count;
    let mut features = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = ComplexVector::zeros(n);
        for k in 0..n {
            let re = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[offset + 8..offset + 16].try_into().unwrap());
            v[k] = Complex64::new(re, im);
            offset += 16;
        }
        features.push(v);
    }
    Ok(EncodedDataset { s, features, labels })
}

/// Loss level `k`: per-arm losses are Gaussian with mean `0.02 k` dB and
/// variance `0.0016 k` dB^2; `k = 0` is lossless.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LossLevel {
    pub k: u32,
}

impl LossLevel {
    pub fn new(k: u32) -> Self {
        Self { k }
    }

    pub fn mean_db(&self) -> f64 {
        0.02 * self.k as f64
    }

    pub fn var_db2(&self) -> f64 {
        0.0016 * self.k as f64
    }
}

/// Draws independent per-arm losses for every MZI: two Gaussian draws per
/// MZI, negative draws clamped to zero. Deterministic given the seed.
pub fn sample_losses(mzi_count: usize, lvl: LossLevel, seed: u64) -> Vec<ArmLoss> {
    if lvl.k == 0 {
        return vec![ArmLoss::lossless(); mzi_count];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(lvl.mean_db(), lvl.var_db2().sqrt()).expect("finite parameters");
    (0..mzi_count)
        .map(|_| {
            let top: f64 = normal.sample(&mut rng);
            let bottom: f64 = normal.sample(&mut rng);
            ArmLoss::new(top.max(0.0), bottom.max(0.0)).expect("clamped draws are non-negative")
        })
        .collect()
}
