//! Binary checkpoint format.
//!
//! ```text
//! "PCLK"                      magic
//! u32   version (= 1)
//! u64   vocab_size, d_model, n_layers, n_heads, d_feedforward, max_len
//! f64   dropout_ratio
//! u64   projector_out
//! u64   projector activation (0 = relu, 1 = identity)
//! u64   tensor count
//! per tensor, in declaration order:
//!   u64 rows, u64 cols, rows*cols f64 (row-major)
//! [u8; 32] SHA-256 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::config::{EncoderConfig, ProjectorActivation};
use super::params::EncoderParams;

const MAGIC: &[u8; 4] = b"PCLK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("checkpoint truncated")]
    Truncated,
    #[error("checkpoint layout does not match its header: {0}")]
    Layout(String),
}

/// Serializes parameters to bytes.
pub fn to_bytes(params: &EncoderParams) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(64 + 8 * params.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [c.vocab_size, c.d_model, c.n_layers, c.n_heads, c.d_feedforward, c.max_len] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&c.dropout_ratio.to_le_bytes());
    out.extend_from_slice(&(c.projector_out as u64).to_le_bytes());
    let act: u64 = match c.projector_activation {
        ProjectorActivation::Relu => 0,
        ProjectorActivation::Identity => 1,
    };
    out.extend_from_slice(&act.to_le_bytes());
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let end = self.pos.checked_add(N).ok_or(CheckpointError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(slice.try_into().expect("length checked"))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn usize(&mut self) -> Result<usize, CheckpointError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| CheckpointError::Layout(format!("value {v} out of range")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

/// Parses and verifies a checkpoint.
pub fn from_bytes(bytes: &[u8]) -> Result<EncoderParams, CheckpointError> {
    if bytes.len() < 4 + 4 + 32 {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(CheckpointError::Checksum);
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = u32::from_le_bytes(r.take::<4>()?);
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let vocab_size = r.usize()?;
    let d_model = r.usize()?;
    let n_layers = r.usize()?;
    let n_heads = r.usize()?;
    let d_feedforward = r.usize()?;
    let max_len = r.usize()?;
    let dropout_ratio = r.f64()?;
    let projector_out = r.usize()?;
    let projector_activation = match r.u64()? {
        0 => ProjectorActivation::Relu,
        1 => ProjectorActivation::Identity,
        v => return Err(CheckpointError::Layout(format!("unknown projector activation {v}"))),
    };
    let config = EncoderConfig {
        vocab_size,
        d_model,
        n_layers,
        n_heads,
        d_feedforward,
        max_len,
        dropout_ratio,
        projector_out,
        projector_activation,
    };
    config.validate().map_err(|e| CheckpointError::Layout(e.to_string()))?;

    let mut params = EncoderParams::init(&config, 0);
    let count = r.usize()?;
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    if count != names.len() {
        return Err(CheckpointError::Layout(format!("expected {} tensors, found {count}", names.len())));
    }
    for (t, name) in params.tensors_mut().into_iter().zip(&names) {
        let rows = r.usize()?;
        let cols = r.usize()?;
        if (rows, cols) != t.dim() {
            return Err(CheckpointError::Layout(format!("{name}: expected {:?}, found ({rows}, {cols})", t.dim())));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        *t = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Layout(format!("{} trailing bytes", body.len() - r.pos)));
    }
    Ok(params)
}

pub fn save(params: &EncoderParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(params)).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
}

pub fn load(path: &Path) -> Result<EncoderParams, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    from_bytes(&bytes)
}

/// Hex SHA-256 of the serialized parameters.
pub fn fingerprint(params: &EncoderParams) -> String {
    let digest = Sha256::digest(to_bytes(params));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
