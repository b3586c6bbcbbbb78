//! Versioned binary checkpoints.
//!
//! ```text
//! "BANS" | version: u32 LE | header_len: u64 LE | header (JSON, UTF-8)
//!        | payload: f64 LE tensors, concatenated in directory order
//! ```
//!
//! The header records model dims, a tensor directory (name, shape, byte
//! offset into the payload), the vocabulary fingerprint, the training step
//! and a SHA-256 of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{tensor_shapes, ModelDims, Params, Seq2SeqModel, TENSOR_NAMES};

pub const MAGIC: &[u8; 4] = b"BANS";
pub const FORMAT_VERSION: u32 = 1;
const PREFIX_LEN: usize = 4 + 4 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("vocabulary fingerprint mismatch: checkpoint has {found}, vocabulary is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dims: ModelDims,
    tensors: Vec<TensorEntry>,
    vocab_fingerprint: String,
    step: u64,
    payload_bytes: usize,
    payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Seq2SeqModel,
    pub vocab_fingerprint: String,
    pub step: u64,
}

impl Checkpoint {
    pub fn new(model: Seq2SeqModel, vocab_fingerprint: impl Into<String>, step: u64) -> Self {
        Self {
            version: FORMAT_VERSION,
            model,
            vocab_fingerprint: vocab_fingerprint.into(),
            step,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let dims = self.model.dims;
        let mut payload = Vec::new();
        let mut tensors = Vec::new();
        for ((name, (rows, cols)), data) in TENSOR_NAMES
            .iter()
            .zip(tensor_shapes(dims))
            .zip(self.model.params.tensors())
        {
            tensors.push(TensorEntry {
                name: name.to_string(),
                rows,
                cols,
                offset: payload.len(),
            });
            for x in data {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
        let header = Header {
            dims,
            tensors,
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            step: self.step,
            payload_bytes: payload.len(),
            payload_sha256: hex::encode(Sha256::digest(&payload)),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(PREFIX_LEN + header.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < PREFIX_LEN {
            return Err(CheckpointError::Corrupt("truncated prefix".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let header_end = PREFIX_LEN
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| CheckpointError::Corrupt("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[PREFIX_LEN..header_end])
            .map_err(|e| CheckpointError::Corrupt(format!("bad header: {e}")))?;
        let payload = &bytes[header_end..];
        if payload.len() != header.payload_bytes {
            return Err(CheckpointError::Corrupt(format!(
                "payload is {} bytes, header declares {}",
                payload.len(),
                header.payload_bytes
            )));
        }
        if hex::encode(Sha256::digest(payload)) != header.payload_sha256 {
            return Err(CheckpointError::Corrupt("payload checksum mismatch".into()));
        }

        let dims = header
            .dims
            .validate()
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let shapes = tensor_shapes(dims);
        if header.tensors.len() != TENSOR_NAMES.len() {
            return Err(CheckpointError::Corrupt("wrong tensor count".into()));
        }
        let mut params = Params::zeros(dims);
        for ((entry, target), (name, shape)) in header
            .tensors
            .iter()
            .zip(params.tensors_mut())
            .zip(TENSOR_NAMES.iter().zip(shapes))
        {
            if entry.name != *name || (entry.rows, entry.cols) != shape {
                return Err(CheckpointError::Corrupt(format!("unexpected tensor entry {}", entry.name)));
            }
            let end = entry.offset + 8 * target.len();
            let raw = payload
                .get(entry.offset..end)
                .ok_or_else(|| CheckpointError::Corrupt(format!("tensor {name} out of bounds")))?;
            for (x, chunk) in target.iter_mut().zip(raw.chunks_exact(8)) {
                *x = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        Ok(Self {
            version,
            model: Seq2SeqModel { dims, params },
            vocab_fingerprint: header.vocab_fingerprint,
            step: header.step,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint.to_bytes()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a checkpoint; when `expected_fingerprint` is given
/// it must match the stored vocabulary fingerprint.
pub fn load_checkpoint(path: &Path, expected_fingerprint: Option<&str>) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ckpt = Checkpoint::from_bytes(&bytes)?;
    if let Some(expected) = expected_fingerprint {
        if ckpt.vocab_fingerprint != expected {
            return Err(CheckpointError::FingerprintMismatch {
                expected: expected.to_string(),
                found: ckpt.vocab_fingerprint,
            });
        }
    }
    Ok(ckpt)
}
