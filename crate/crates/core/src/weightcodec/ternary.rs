use serde::{Deserialize, Serialize};

use super::CodecError;
use crate::matrix::Matrix;
use crate::pathgen::{path_hash, BuildPath, ChunkConfig, LutMode};

/// Bit 7 of a packed byte: negate the looked-up entry.
pub const SIGN_BIT: u8 = 0x80;
/// Bits 6..0 of a packed byte: sequential LUT address.
pub const ADDRESS_MASK: u8 = 0x7f;

/// M×K matrix with every value in {-1, 0, 1}.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryMatrix(Matrix<i8>);

impl TernaryMatrix {
    pub fn new(m: Matrix<i8>) -> Result<Self, CodecError> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(CodecError::Shape(format!(
                "ternary matrix must be non-empty, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if let Some(pos) = m.data().iter().position(|v| !(-1..=1).contains(v)) {
            return Err(CodecError::NotTernary {
                row: pos / m.cols(),
                col: pos % m.cols(),
                value: m.data()[pos] as i32,
            });
        }
        Ok(TernaryMatrix(m))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn as_matrix(&self) -> &Matrix<i8> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<i8> {
        self.0
    }

    pub fn negated(&self) -> Self {
        TernaryMatrix(self.0.map(|v| -v))
    }
}

/// Byte order of a packed stream: tiles of `m_tile` rows × `k_chunks` chunks, tiles visited
/// m-major then k, rows within a tile, then chunks within the row.
///
/// The whole-matrix order (one tile) is plain row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileOrder {
    pub m_tile: usize,
    pub k_chunks: usize,
}

impl TileOrder {
    pub fn whole(rows: usize, chunks: usize) -> Self {
        TileOrder {
            m_tile: rows.max(1),
            k_chunks: chunks.max(1),
        }
    }

    /// Position of (row, chunk) in a stream of `rows × chunks` bytes.
    pub fn offset(&self, rows: usize, chunks: usize, row: usize, chunk: usize) -> usize {
        let mt = row / self.m_tile;
        let kt = chunk / self.k_chunks;
        let row0 = mt * self.m_tile;
        let chunk0 = kt * self.k_chunks;
        let tile_rows = self.m_tile.min(rows - row0);
        let tile_chunks = self.k_chunks.min(chunks - chunk0);
        row0 * chunks + chunk0 * tile_rows + (row - row0) * tile_chunks + (chunk - chunk0)
    }
}

/// Encoded weight stream: one byte per chunk of c weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedWeightStream {
    pub config: ChunkConfig,
    pub path_hash: u64,
    pub rows: usize,
    pub cols: usize,
    pub order: TileOrder,
    pub bytes: Vec<u8>,
}

impl PackedWeightStream {
    pub fn chunks_per_row(&self) -> usize {
        self.cols.div_ceil(self.config.c())
    }

    /// Packed byte for a chunk of a row.
    pub fn byte(&self, row: usize, chunk: usize) -> u8 {
        let chunks = self.chunks_per_row();
        self.bytes[self.order.offset(self.rows, chunks, row, chunk)]
    }

    /// Same content in another tile order.
    pub fn reordered(&self, order: TileOrder) -> Self {
        let chunks = self.chunks_per_row();
        let mut bytes = vec![0u8; self.bytes.len()];
        for r in 0..self.rows {
            for g in 0..chunks {
                bytes[order.offset(self.rows, chunks, r, g)] = self.byte(r, g);
            }
        }
        PackedWeightStream {
            order,
            bytes,
            ..self.clone()
        }
    }

    /// Payload bits per logical weight.
    pub fn bits_per_weight(&self) -> f64 {
        (self.bytes.len() * 8) as f64 / (self.rows * self.cols) as f64
    }
}

/// Result of decoding a stream, with what the K-boundary padding held.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unpacked {
    pub matrix: TernaryMatrix,
    /// Zero weights appended to each row to complete the last chunk.
    pub padded_per_row: usize,
    /// Padding positions that decoded to a non-zero weight (0 for streams this crate wrote).
    pub nonzero_padding: usize,
}

/// Encodes a chunk of weights into its packed byte under `path`'s permutation.
pub fn encode_chunk(path: &BuildPath, chunk: &[i8]) -> Result<u8, CodecError> {
    let cfg = &path.config;
    let code = cfg
        .encode(chunk)
        .ok_or_else(|| CodecError::Shape(format!("chunk {chunk:?} outside the {} alphabet", cfg.mode())))?;
    let (address, flipped) = path
        .locate(code)
        .ok_or(CodecError::BadAddress { address: u8::MAX, stored: cfg.stored_entries() })?;
    Ok(((flipped as u8) << 7) | address)
}

/// Decodes a packed byte back to its weight chunk.
pub fn decode_chunk(path: &BuildPath, byte: u8) -> Result<Vec<i8>, CodecError> {
    let cfg = &path.config;
    let address = byte & ADDRESS_MASK;
    let code = path
        .canonical_map
        .code_at(address)
        .ok_or(CodecError::BadAddress { address, stored: cfg.stored_entries() })?;
    let mut chunk = cfg.decode(code);
    if byte & SIGN_BIT != 0 {
        chunk.iter_mut().for_each(|w| *w = -*w);
    }
    Ok(chunk)
}

/// Packs any matrix over the path's alphabet, chunking along columns with zero padding.
pub(crate) fn pack_chunks(
    w: &Matrix<i8>,
    path: &BuildPath,
    order: TileOrder,
) -> Result<PackedWeightStream, CodecError> {
    let c = path.config.c();
    let chunks = w.cols().div_ceil(c);
    let mut bytes = vec![0u8; w.rows() * chunks];
    let mut buf = vec![0i8; c];
    for r in 0..w.rows() {
        let row = w.row(r);
        for g in 0..chunks {
            buf.fill(0);
            let src = &row[g * c..((g + 1) * c).min(row.len())];
            buf[..src.len()].copy_from_slice(src);
            bytes[order.offset(w.rows(), chunks, r, g)] = encode_chunk(path, &buf)?;
        }
    }
    Ok(PackedWeightStream {
        config: path.config,
        path_hash: path_hash(path),
        rows: w.rows(),
        cols: w.cols(),
        order,
        bytes,
    })
}

/// Packs ternary weights in row-major chunk order.
pub fn pack_ternary(w: &TernaryMatrix, path: &BuildPath) -> Result<PackedWeightStream, CodecError> {
    let chunks = w.cols().div_ceil(path.config.c());
    pack_ternary_tiled(w, path, TileOrder::whole(w.rows(), chunks))
}

/// Packs ternary weights in the query order of a tiled schedule.
pub fn pack_ternary_tiled(
    w: &TernaryMatrix,
    path: &BuildPath,
    order: TileOrder,
) -> Result<PackedWeightStream, CodecError> {
    if path.config.mode() != LutMode::Ternary {
        return Err(CodecError::ConfigMismatch(format!(
            "ternary weights need a ternary path, got {}",
            path.config.mode()
        )));
    }
    pack_chunks(w.as_matrix(), path, order)
}

pub fn unpack_ternary(stream: &PackedWeightStream, path: &BuildPath) -> Result<Unpacked, CodecError> {
    if path.config.mode() != LutMode::Ternary || path.config.c() != stream.config.c() {
        return Err(CodecError::ConfigMismatch(format!(
            "stream is {} c={}, path is {} c={}",
            stream.config.mode(),
            stream.config.c(),
            path.config.mode(),
            path.config.c()
        )));
    }
    let hash = path_hash(path);
    if hash != stream.path_hash {
        return Err(CodecError::PathHashMismatch {
            stream: stream.path_hash,
            path: hash,
        });
    }
    let c = path.config.c();
    let chunks = stream.chunks_per_row();
    let padded_per_row = chunks * c - stream.cols;
    let mut out = Matrix::<i8>::zeros(stream.rows, stream.cols);
    let mut nonzero_padding = 0;
    for r in 0..stream.rows {
        for g in 0..chunks {
            let chunk = decode_chunk(path, stream.byte(r, g))?;
            for (i, &w) in chunk.iter().enumerate() {
                let col = g * c + i;
                if col < stream.cols {
                    out.set(r, col, w);
                } else if w != 0 {
                    nonzero_padding += 1;
                }
            }
        }
    }
    Ok(Unpacked {
        matrix: TernaryMatrix::new(out)?,
        padded_per_row,
        nonzero_padding,
    })
}
