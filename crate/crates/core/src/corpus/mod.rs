//! Data model and bit-exact file I/O for embeddings, activations, label
//! vocabularies and run manifests. Everything downstream reads only
//! through this module.
//!
//! Matrices are immutable after construction and safe to share across
//! worker threads.

mod format;
mod manifest;
mod vocab;

pub use format::{load_tensor, peek_header, save_tensor, Tensor, TensorHeader};
pub use manifest::{
    load_manifest, GeneratedActivations, HeldoutSimilarities, MetricConfig, RunInputs, RunManifest,
};
pub use vocab::{LabelVocabulary, SourceTag};

use thiserror::Error;

/// Embedding rows are renormalized only when they drift beyond this band,
/// which keeps save/load round trips bit-stable.
pub const NORM_SKIP_BAND: f64 = 1e-6;

/// Rows with a smaller Euclidean norm cannot be normalized meaningfully.
pub const MIN_ROW_NORM: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad magic at byte 0: expected \"EMB1\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unknown tensor kind {value} at byte offset 4")]
    UnknownKind { value: u8 },
    #[error("reserved header bytes 5..8 must be zero (byte offset {offset})")]
    NonZeroReserved { offset: u64 },
    #[error("truncated payload at byte offset {offset}: need {needed} more bytes")]
    Truncated { offset: u64, needed: u64 },
    #[error("non-finite value in row {row}, column {col}{}", offset_suffix(*.offset))]
    NonFinite {
        row: usize,
        col: usize,
        offset: Option<u64>,
    },
    #[error("embedding row {row} has norm {norm:.3e} below {MIN_ROW_NORM:e}{}", offset_suffix(*.offset))]
    ZeroNormRow {
        row: usize,
        norm: f64,
        offset: Option<u64>,
    },
    #[error("dimension overflow: {rows} rows x {cols} cols")]
    Overflow { rows: u64, cols: u64 },
    #[error("data length {found} does not match rows x cols = {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("id list has {found} entries for {expected} rows")]
    IdCount { expected: usize, found: usize },
    #[error("unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: u64 },
    #[error("expected a {expected} tensor, file holds a {found} tensor")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("invalid id block at byte offset {offset}: {source}")]
    IdJson {
        offset: u64,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest json: {0}")]
    ManifestJson(#[from] serde_json::Error),
}

fn offset_suffix(offset: Option<u64>) -> String {
    match offset {
        Some(o) => format!(" (byte offset {o})"),
        None => String::new(),
    }
}

impl CorpusError {
    /// Configuration errors exit with a different code than data errors.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            CorpusError::Manifest(_) | CorpusError::ManifestJson(_)
        )
    }
}

/// Unit-normalized semantic vectors, one row per item, stored as 32-bit
/// floats. All internal accumulation promotes to 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    item_ids: Option<Vec<String>>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from raw row-major data, normalizing each row to
    /// unit norm. Rows already inside [`NORM_SKIP_BAND`] keep their bits.
    pub fn new(
        rows: usize,
        dim: usize,
        data: Vec<f32>,
        item_ids: Option<Vec<String>>,
    ) -> Result<Self, CorpusError> {
        let mut m = Self::new_unnormalized(rows, dim, data, item_ids)?;
        normalize_rows(&mut m.data, m.rows, m.dim, None)?;
        Ok(m)
    }

    fn new_unnormalized(
        rows: usize,
        dim: usize,
        data: Vec<f32>,
        item_ids: Option<Vec<String>>,
    ) -> Result<Self, CorpusError> {
        let expected = rows.checked_mul(dim).ok_or(CorpusError::Overflow {
            rows: rows as u64,
            cols: dim as u64,
        })?;
        if data.len() != expected {
            return Err(CorpusError::DataLength {
                expected,
                found: data.len(),
            });
        }
        check_finite(&data, dim, None)?;
        if let Some(ids) = &item_ids {
            if ids.len() != rows {
                return Err(CorpusError::IdCount {
                    expected: rows,
                    found: ids.len(),
                });
            }
        }
        Ok(Self {
            rows,
            dim,
            data,
            item_ids,
        })
    }

    /// Builds from 64-bit rows; each row is unit-normalized in f64 before
    /// rounding to storage precision.
    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self, CorpusError> {
        let dim = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < MIN_ROW_NORM {
                return Err(CorpusError::ZeroNormRow {
                    row: i,
                    norm,
                    offset: None,
                });
            }
            data.extend(row.iter().map(|v| (v / norm) as f32));
        }
        Self::new_unnormalized(rows.len(), dim, data, None)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn item_ids(&self) -> Option<&[String]> {
        self.item_ids.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CorpusError> {
        match load_tensor(path)? {
            Tensor::Embedding(m) => Ok(m),
            Tensor::Activation(_) => Err(CorpusError::KindMismatch {
                expected: "embedding",
                found: "activation",
            }),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CorpusError> {
        save_tensor(&Tensor::Embedding(self.clone()), path)
    }
}

/// Per-neuron scalar activations over a probing set, one row per neuron.
/// Values are stored raw; selection thresholds and metric normalizers all
/// need the unscaled activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    neurons: usize,
    samples: usize,
    data: Vec<f32>,
    neuron_ids: Option<Vec<String>>,
}

impl ActivationMatrix {
    pub fn new(
        neurons: usize,
        samples: usize,
        data: Vec<f32>,
        neuron_ids: Option<Vec<String>>,
    ) -> Result<Self, CorpusError> {
        let expected = neurons.checked_mul(samples).ok_or(CorpusError::Overflow {
            rows: neurons as u64,
            cols: samples as u64,
        })?;
        if data.len() != expected {
            return Err(CorpusError::DataLength {
                expected,
                found: data.len(),
            });
        }
        check_finite(&data, samples, None)?;
        if let Some(ids) = &neuron_ids {
            if ids.len() != neurons {
                return Err(CorpusError::IdCount {
                    expected: neurons,
                    found: ids.len(),
                });
            }
        }
        Ok(Self {
            neurons,
            samples,
            data,
            neuron_ids,
        })
    }

    pub fn from_rows_f64(rows: &[Vec<f64>]) -> Result<Self, CorpusError> {
        let samples = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * samples);
        for row in rows {
            data.extend(row.iter().map(|v| *v as f32));
        }
        Self::new(rows.len(), samples, data, None)
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn neuron_ids(&self) -> Option<&[String]> {
        self.neuron_ids.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.samples..(i + 1) * self.samples]
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CorpusError> {
        match load_tensor(path)? {
            Tensor::Activation(m) => Ok(m),
            Tensor::Embedding(_) => Err(CorpusError::KindMismatch {
                expected: "activation",
                found: "embedding",
            }),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CorpusError> {
        save_tensor(&Tensor::Activation(self.clone()), path)
    }
}

fn check_finite(data: &[f32], cols: usize, base_offset: Option<u64>) -> Result<(), CorpusError> {
    for (i, v) in data.iter().enumerate() {
        if !v.is_finite() {
            return Err(CorpusError::NonFinite {
                row: i.checked_div(cols).unwrap_or(0),
                col: i.checked_rem(cols).unwrap_or(0),
                offset: base_offset.map(|b| b + 4 * i as u64),
            });
        }
    }
    Ok(())
}

/// Renormalizes each row in f64; rows within [`NORM_SKIP_BAND`] of unit
/// norm are left untouched so reloading a saved matrix never changes bits.
fn normalize_rows(
    data: &mut [f32],
    rows: usize,
    dim: usize,
    base_offset: Option<u64>,
) -> Result<(), CorpusError> {
    for r in 0..rows {
        let row = &mut data[r * dim..(r + 1) * dim];
        let norm = row
            .iter()
            .map(|v| (*v as f64) * (*v as f64))
            .sum::<f64>()
            .sqrt();
        if norm < MIN_ROW_NORM {
            return Err(CorpusError::ZeroNormRow {
                row: r,
                norm,
                offset: base_offset.map(|b| b + 4 * (r * dim) as u64),
            });
        }
        if (norm - 1.0).abs() > NORM_SKIP_BAND {
            for v in row.iter_mut() {
                *v = ((*v as f64) / norm) as f32;
            }
        }
    }
    Ok(())
}
