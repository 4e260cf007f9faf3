//! EMB1 binary tensor format.
//!
//! Layout (little-endian):
//! - bytes 0..4   magic `EMB1`
//! - byte  4      kind: 0 = embedding, 1 = activation
//! - bytes 5..8   reserved, zero
//! - bytes 8..16  rows (u64)
//! - bytes 16..24 cols (u64)
//! - rows*cols    IEEE-754 binary32, row-major
//! - optional     u64 length + UTF-8 JSON array of row ids

use std::fs;
use std::path::Path;

use super::{check_finite, normalize_rows, ActivationMatrix, CorpusError, EmbeddingMatrix};

pub const MAGIC: [u8; 4] = *b"EMB1";
const HEADER_LEN: u64 = 24;

/// A loaded tensor, tagged by the kind byte.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Embedding(EmbeddingMatrix),
    Activation(ActivationMatrix),
}

impl Tensor {
    pub fn rows(&self) -> usize {
        match self {
            Tensor::Embedding(m) => m.rows(),
            Tensor::Activation(m) => m.neurons(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Tensor::Embedding(m) => m.dim(),
            Tensor::Activation(m) => m.samples(),
        }
    }
}

/// Header fields, readable without loading the payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorHeader {
    pub kind: u8,
    pub rows: u64,
    pub cols: u64,
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads and validates only the 24-byte header.
pub fn peek_header(path: &Path) -> Result<TensorHeader, CorpusError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_header(&bytes)
}

fn parse_header(bytes: &[u8]) -> Result<TensorHeader, CorpusError> {
    if bytes.len() < HEADER_LEN as usize {
        return Err(CorpusError::Truncated {
            offset: bytes.len() as u64,
            needed: HEADER_LEN - bytes.len() as u64,
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != MAGIC {
        return Err(CorpusError::BadMagic { found: magic });
    }
    let kind = bytes[4];
    if kind > 1 {
        return Err(CorpusError::UnknownKind { value: kind });
    }
    if bytes[5..8] != [0, 0, 0] {
        let offset = 5 + bytes[5..8].iter().position(|b| *b != 0).unwrap() as u64;
        return Err(CorpusError::NonZeroReserved { offset });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    Ok(TensorHeader { kind, rows, cols })
}

/// Loads and fully validates a tensor file. Embedding rows are
/// renormalized to unit norm when they drift outside the skip band.
pub fn load_tensor(path: &Path) -> Result<Tensor, CorpusError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let header = parse_header(&bytes)?;

    let numel = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or(CorpusError::Overflow {
            rows: header.rows,
            cols: header.cols,
        })?;
    let payload_end = HEADER_LEN + numel;
    if (bytes.len() as u64) < payload_end {
        return Err(CorpusError::Truncated {
            offset: bytes.len() as u64,
            needed: payload_end - bytes.len() as u64,
        });
    }
    let rows = header.rows as usize;
    let cols = header.cols as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in bytes[HEADER_LEN as usize..payload_end as usize].chunks_exact(4) {
        data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    check_finite(&data, cols, Some(HEADER_LEN))?;

    let ids = parse_id_block(&bytes, payload_end, rows)?;

    match header.kind {
        0 => {
            normalize_rows(&mut data, rows, cols, Some(HEADER_LEN))?;
            Ok(Tensor::Embedding(EmbeddingMatrix {
                rows,
                dim: cols,
                data,
                item_ids: ids,
            }))
        }
        1 => Ok(Tensor::Activation(ActivationMatrix {
            neurons: rows,
            samples: cols,
            data,
            neuron_ids: ids,
        })),
        _ => unreachable!("kind validated in parse_header"),
    }
}

fn parse_id_block(
    bytes: &[u8],
    payload_end: u64,
    rows: usize,
) -> Result<Option<Vec<String>>, CorpusError> {
    let rest = &bytes[payload_end as usize..];
    if rest.is_empty() {
        return Ok(None);
    }
    if rest.len() < 8 {
        return Err(CorpusError::Truncated {
            offset: bytes.len() as u64,
            needed: 8 - rest.len() as u64,
        });
    }
    let id_len = u64::from_le_bytes(rest[0..8].try_into().unwrap());
    let id_start = payload_end + 8;
    let id_end = id_start.checked_add(id_len).ok_or(CorpusError::Overflow {
        rows: id_len,
        cols: 1,
    })?;
    if (bytes.len() as u64) < id_end {
        return Err(CorpusError::Truncated {
            offset: bytes.len() as u64,
            needed: id_end - bytes.len() as u64,
        });
    }
    if bytes.len() as u64 > id_end {
        return Err(CorpusError::TrailingBytes { offset: id_end });
    }
    let ids: Vec<String> = serde_json::from_slice(&bytes[id_start as usize..id_end as usize])
        .map_err(|source| CorpusError::IdJson {
            offset: id_start,
            source,
        })?;
    if ids.len() != rows {
        return Err(CorpusError::IdCount {
            expected: rows,
            found: ids.len(),
        });
    }
    Ok(Some(ids))
}

/// Serializes a tensor to its deterministic byte stream.
pub fn tensor_bytes(tensor: &Tensor) -> Vec<u8> {
    let (kind, rows, cols, data, ids) = match tensor {
        Tensor::Embedding(m) => (0u8, m.rows(), m.dim(), m.data(), m.item_ids()),
        Tensor::Activation(m) => (1u8, m.neurons(), m.samples(), m.data(), m.neuron_ids()),
    };
    let mut out = Vec::with_capacity(HEADER_LEN as usize + data.len() * 4);
    out.extend_from_slice(&MAGIC);
    out.push(kind);
    out.extend_from_slice(&[0, 0, 0]);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(ids) = ids {
        let json = serde_json::to_vec(ids).expect("string list serializes");
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
    }
    out
}

/// Writes the deterministic byte stream; re-loading yields an equal
/// tensor and re-saving yields identical bytes.
pub fn save_tensor(tensor: &Tensor, path: &Path) -> Result<(), CorpusError> {
    fs::write(path, tensor_bytes(tensor)).map_err(|e| io_err(path, e))
}
