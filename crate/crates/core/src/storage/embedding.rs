//! `embedding.bin`: a 16-byte header followed by little-endian f32 values.
//!
//! | Offset | Size | Field                                         |
//! | ------ | ---- | --------------------------------------------- |
//! | 0      | 4    | magic `GCEB`                                  |
//! | 4      | 4    | dim, u32 LE                                   |
//! | 8      | 8    | first 8 bytes of SHA-256(encoder_id), u64 LE  |
//! | 16     | 4·dim| values, f32 LE                                |

use crate::digest::sha256_bytes;
use crate::model::EmbeddingVector;

pub const MAGIC: &[u8; 4] = b"GCEB";
pub const HEADER_LEN: usize = 16;

pub fn encoder_hash(encoder_id: &str) -> u64 {
    let h = sha256_bytes(encoder_id.as_bytes());
    u64::from_le_bytes(h[..8].try_into().expect("8 bytes"))
}

/// Rounds every component to f32, the storage precision. Vectors that pass
/// through this are stored and reloaded without change.
pub fn quantize(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v as f32 as f64).collect()
}

pub fn encode(e: &EmbeddingVector) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * e.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(e.dim() as u32).to_le_bytes());
    out.extend_from_slice(&encoder_hash(e.encoder_id()).to_le_bytes());
    for &v in e.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Decodes and checks the file against the encoder id recorded elsewhere.
pub fn decode(bytes: &[u8], encoder_id: &str) -> Result<EmbeddingVector, String> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err("missing embedding header".into());
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let hash = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if hash != encoder_hash(encoder_id) {
        return Err(format!("encoder hash does not match `{encoder_id}`"));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * dim {
        return Err(format!("expected {dim} values, found {} bytes", body.len()));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingVector::new(values, encoder_id).map_err(|e| e.to_string())
}
