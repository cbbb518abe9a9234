//! Offline weight encoding.
//!
//! Ternary weights are packed c at a time into one byte: the chunk's base-3 code is folded
//! onto its stored mirror representative, bit 7 records the fold and bits 6..0 hold the LUT
//! address the build path assigned to it. Integer weights for bit-serial execution are split
//! into binary planes instead.

mod bitplane;
mod ternary;

use num_rational::Ratio;
use thiserror::Error;

use crate::pathgen::{ChunkConfig, LutMode, PathError};

pub use bitplane::{decompose_bitplanes, decompose_sign_split, BitPlaneSet, PlaneEncoding};
pub use ternary::{
    decode_chunk, encode_chunk, pack_ternary, pack_ternary_tiled, unpack_ternary, PackedWeightStream,
    TernaryMatrix, TileOrder, Unpacked, ADDRESS_MASK, SIGN_BIT,
};

pub(crate) use ternary::pack_chunks;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("path does not match stream: {0}")]
    ConfigMismatch(String),
    #[error("stream was packed for path {stream:016x}, got path {path:016x}")]
    PathHashMismatch { stream: u64, path: u64 },
    #[error("LUT address {address} out of range (stored entries: {stored})")]
    BadAddress { address: u8, stored: usize },
    #[error("weight {value} at ({row}, {col}) is not ternary")]
    NotTernary { row: usize, col: usize, value: i32 },
    #[error("weight {value} does not fit in {bits} {} bits", if *signed { "signed" } else { "unsigned" })]
    Overflow { value: i32, bits: usize, signed: bool },
    #[error("shape: {0}")]
    Shape(String),
    #[error("malformed packed-weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Storage cost of packing c ternary weights into one integer: ⌈log2 3^c⌉ / c.
///
/// # Panics
/// If `c` is 0 or 3^c overflows u128 (c > 80).
pub fn bits_per_weight(c: u32) -> Ratio<u64> {
    assert!(c >= 1, "chunk size must be positive");
    let states = 3u128.checked_pow(c).expect("3^c fits in u128");
    // bits needed to index `states` distinct values
    let bits = 128 - (states - 1).leading_zeros();
    Ratio::new(bits as u64, c as u64)
}

pub const WEIGHT_MAGIC: &[u8; 4] = b"PLTW";
pub const WEIGHT_VERSION: u8 = 1;
const WEIGHT_HEADER_LEN: usize = 23;

/// `PLTW` file: magic, version u8, mode u8, c u8, M u32, K u32, path_hash u64, then the
/// payload in row-major chunk order.
pub fn encode_packed(stream: &PackedWeightStream) -> Vec<u8> {
    let row_major = stream.reordered(TileOrder::whole(stream.rows, stream.chunks_per_row()));
    let mut out = Vec::with_capacity(WEIGHT_HEADER_LEN + row_major.bytes.len());
    out.extend_from_slice(WEIGHT_MAGIC);
    out.push(WEIGHT_VERSION);
    out.push(stream.config.mode().code());
    out.push(stream.config.c() as u8);
    out.extend_from_slice(&(stream.rows as u32).to_le_bytes());
    out.extend_from_slice(&(stream.cols as u32).to_le_bytes());
    out.extend_from_slice(&stream.path_hash.to_le_bytes());
    out.extend_from_slice(&row_major.bytes);
    out
}

/// Parses a `PLTW` file. The pipeline depth is not part of the format, so the returned
/// config carries depth 1 until the stream is matched with its path.
pub fn decode_packed(bytes: &[u8]) -> Result<PackedWeightStream, CodecError> {
    if bytes.len() < WEIGHT_HEADER_LEN {
        return Err(CodecError::Format("truncated header".into()));
    }
    if &bytes[..4] != WEIGHT_MAGIC {
        return Err(CodecError::Format("bad magic, expected PLTW".into()));
    }
    if bytes[4] != WEIGHT_VERSION {
        return Err(CodecError::Format(format!("unsupported version {}", bytes[4])));
    }
    let mode = LutMode::from_code(bytes[5]).ok_or_else(|| CodecError::Format("unknown mode".into()))?;
    let config = ChunkConfig::new(mode, bytes[6] as usize, 1)?;
    let rows = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
    let path_hash = u64::from_le_bytes(bytes[15..23].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(CodecError::Format("empty matrix".into()));
    }
    let chunks = cols.div_ceil(config.c());
    let payload = &bytes[WEIGHT_HEADER_LEN..];
    if payload.len() != rows * chunks {
        return Err(CodecError::Format(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            rows * chunks
        )));
    }
    Ok(PackedWeightStream {
        config,
        path_hash,
        rows,
        cols,
        order: TileOrder::whole(rows, chunks),
        bytes: payload.to_vec(),
    })
}
