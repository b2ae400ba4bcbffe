//! Raw I/Q files: interleaved little-endian i16, I then Q, 20 Msps implied.

use std::fs;
use std::io;
use std::path::Path;

use ofdmrx_core::numerics::IqSample;
use thiserror::Error;

const SAMPLE_BYTES: usize = 4;

#[derive(Debug, Error)]
pub enum IqError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("truncated sample at byte offset {offset} ({len} bytes total)")]
    Truncated { offset: usize, len: usize },
}

pub fn encode(stream: &[IqSample]) -> Vec<u8> {
    let mut out = Vec::with_capacity(stream.len() * SAMPLE_BYTES);
    for s in stream {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

/// Inverse of [`encode`]; a trailing partial sample is an error at its offset.
pub fn decode(bytes: &[u8]) -> Result<Vec<IqSample>, IqError> {
    let whole = bytes.len() / SAMPLE_BYTES * SAMPLE_BYTES;
    if whole != bytes.len() {
        return Err(IqError::Truncated { offset: whole, len: bytes.len() });
    }
    Ok(bytes
        .chunks_exact(SAMPLE_BYTES)
        .map(|c| IqSample::new(i16::from_le_bytes([c[0], c[1]]), i16::from_le_bytes([c[2], c[3]])))
        .collect())
}

pub fn write_iq(path: &Path, stream: &[IqSample]) -> Result<(), IqError> {
    fs::write(path, encode(stream)).map_err(|source| IqError::Io { path: path.display().to_string(), source })
}

pub fn read_iq(path: &Path) -> Result<Vec<IqSample>, IqError> {
    let bytes = fs::read(path).map_err(|source| IqError::Io { path: path.display().to_string(), source })?;
    decode(&bytes)
}
