use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lut::{construct_lut_with, query, Lut, LutPrecision};
use super::{ActivationMatrix, KernelError, OutputMatrix};
use crate::matrix::Matrix;
use crate::pathgen::{path_hash, BuildPath, LutMode};
use crate::weightcodec::{pack_chunks, BitPlaneSet, PackedWeightStream, TileOrder, ADDRESS_MASK, SIGN_BIT};

/// Operation counts of one GEMM run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    /// Additions spent building LUTs.
    pub construct_adds: u64,
    /// LUT lookups.
    pub queries: u64,
    /// Additions combining bit-plane partial products of one chunk.
    pub merge_adds: u64,
    /// Additions accumulating per-chunk results into the output.
    pub reduce_adds: u64,
}

impl Census {
    pub fn total_adds(&self) -> u64 {
        self.construct_adds + self.merge_adds + self.reduce_adds
    }
}

impl AddAssign for Census {
    fn add_assign(&mut self, rhs: Self) {
        self.construct_adds += rhs.construct_adds;
        self.queries += rhs.queries;
        self.merge_adds += rhs.merge_adds;
        self.reduce_adds += rhs.reduce_adds;
    }
}

/// How tables are filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// Follow the build path: one addition per stored entry.
    #[default]
    Path,
    /// Compute every one of the radix^c entries independently with c additions each and no
    /// mirror folding. Exists to measure the unoptimised construction cost.
    Naive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub construction: Construction,
    pub precision: LutPrecision,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GemmResult {
    pub output: OutputMatrix,
    pub census: Census,
}

/// Table for one activation chunk under the chosen construction.
enum ChunkTable {
    Path(Lut),
    /// Indexed by full (unfolded) value code.
    Full(Vec<i32>),
}

fn build_table(a: &[i32], path: &BuildPath, opts: &KernelOptions) -> (ChunkTable, u64) {
    match opts.construction {
        Construction::Path => {
            let (lut, adds) = construct_lut_with(a, path, opts.precision);
            (ChunkTable::Path(lut), adds)
        }
        Construction::Naive => {
            let cfg = &path.config;
            let mut adds = 0;
            let table = (0..cfg.full_space())
                .map(|code| {
                    let mut acc = 0i32;
                    for (w, &x) in cfg.decode(code).into_iter().zip(a) {
                        acc += w as i32 * x;
                        adds += 1;
                    }
                    acc
                })
                .collect();
            (ChunkTable::Full(table), adds)
        }
    }
}

fn lookup(table: &ChunkTable, path: &BuildPath, byte: u8) -> Result<i32, KernelError> {
    match table {
        ChunkTable::Path(lut) => query(lut, byte),
        ChunkTable::Full(full) => {
            let address = byte & ADDRESS_MASK;
            let code = path
                .canonical_map
                .code_at(address)
                .ok_or(KernelError::BadAddress { address, stored: path.canonical_map.len() })?;
            let code = if byte & SIGN_BIT != 0 { path.config.mirror(code) } else { code };
            Ok(full[code as usize])
        }
    }
}

fn chunk_of(x: &ActivationMatrix, col: usize, chunk: usize, c: usize, buf: &mut [i32]) {
    buf.fill(0);
    let start = chunk * c;
    for (i, slot) in buf.iter_mut().enumerate() {
        if start + i < x.rows() {
            *slot = *x.matrix().get(start + i, col);
        }
    }
}

fn check_accumulator(x: &ActivationMatrix, k: usize, weight_bits: u32) -> Result<(), KernelError> {
    let k_bits = usize::BITS - (k.max(1) - 1).leading_zeros();
    let needed = x.bits() + k_bits + weight_bits;
    if needed > 32 {
        return Err(KernelError::AccumulatorOverflow { needed });
    }
    Ok(())
}

fn assemble(rows: usize, cols: usize, columns: Vec<(Vec<i32>, Census)>) -> GemmResult {
    let mut output = Matrix::<i32>::zeros(rows, cols);
    let mut census = Census::default();
    for (n, (col, c)) in columns.into_iter().enumerate() {
        for (r, v) in col.into_iter().enumerate() {
            output.set(r, n, v);
        }
        census += c;
    }
    GemmResult { output, census }
}

/// Ternary LUT GEMM with the path's default options.
pub fn mpgemm_ternary(
    w: &PackedWeightStream,
    x: &ActivationMatrix,
    path: &BuildPath,
) -> Result<GemmResult, KernelError> {
    mpgemm_ternary_with(w, x, path, &KernelOptions::default())
}

/// Ternary LUT GEMM: per output column, build one table per activation chunk and query it
/// once per weight row. Columns run in parallel.
pub fn mpgemm_ternary_with(
    w: &PackedWeightStream,
    x: &ActivationMatrix,
    path: &BuildPath,
    opts: &KernelOptions,
) -> Result<GemmResult, KernelError> {
    if path.config.mode() != LutMode::Ternary || path.config.c() != w.config.c() {
        return Err(KernelError::ConfigMismatch(format!(
            "stream is {} c={}, path is {} c={}",
            w.config.mode(),
            w.config.c(),
            path.config.mode(),
            path.config.c()
        )));
    }
    if path_hash(path) != w.path_hash {
        return Err(KernelError::ConfigMismatch("stream was packed with a different path".into()));
    }
    if w.cols != x.rows() {
        return Err(KernelError::ShapeMismatch {
            left: (w.rows, w.cols),
            right: (x.rows(), x.cols()),
        });
    }
    check_accumulator(x, w.cols, 1)?;

    let c = path.config.c();
    let chunks = w.chunks_per_row();
    let rows = w.rows;
    let stream = w.reordered(TileOrder::whole(rows, chunks));
    let bytes = &stream.bytes;

    let columns = (0..x.cols())
        .into_par_iter()
        .map(|n| {
            let mut acc = vec![0i32; rows];
            let mut census = Census::default();
            let mut a = vec![0i32; c];
            for g in 0..chunks {
                chunk_of(x, n, g, c, &mut a);
                let (table, adds) = build_table(&a, path, opts);
                census.construct_adds += adds;
                for (r, slot) in acc.iter_mut().enumerate() {
                    let v = lookup(&table, path, bytes[r * chunks + g])?;
                    if g == 0 {
                        *slot = v;
                    } else {
                        *slot += v;
                        census.reduce_adds += 1;
                    }
                }
                census.queries += rows as u64;
            }
            Ok((acc, census))
        })
        .collect::<Result<Vec<_>, KernelError>>()?;

    Ok(assemble(rows, x.cols(), columns))
}

/// Bit-serial LUT GEMM with path construction.
pub fn mpgemm_bitserial(
    planes: &BitPlaneSet,
    x: &ActivationMatrix,
    path: &BuildPath,
) -> Result<GemmResult, KernelError> {
    mpgemm_bitserial_with(planes, x, path, &KernelOptions::default())
}

/// Bit-serial LUT GEMM: every plane queries the same binary table; the per-chunk plane
/// results are merged with their plane weights before accumulation.
pub fn mpgemm_bitserial_with(
    planes: &BitPlaneSet,
    x: &ActivationMatrix,
    path: &BuildPath,
    opts: &KernelOptions,
) -> Result<GemmResult, KernelError> {
    if path.config.mode() != LutMode::Binary {
        return Err(KernelError::ConfigMismatch(format!(
            "bit-serial execution needs a binary path, got {}",
            path.config.mode()
        )));
    }
    if planes.planes.is_empty() {
        return Err(KernelError::ConfigMismatch("no bit planes".into()));
    }
    let (rows, k) = (planes.rows(), planes.cols());
    if k != x.rows() {
        return Err(KernelError::ShapeMismatch {
            left: (rows, k),
            right: (x.rows(), x.cols()),
        });
    }
    let max_weight = planes.plane_weights.iter().map(|w| w.unsigned_abs()).sum::<u32>();
    check_accumulator(x, k, 32 - max_weight.leading_zeros() + 1)?;

    let c = path.config.c();
    let chunks = k.div_ceil(c);
    let packed: Vec<PackedWeightStream> = planes
        .planes
        .iter()
        .map(|p| {
            pack_chunks(p, path, TileOrder::whole(rows, chunks))
                .map_err(|e| KernelError::ConfigMismatch(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let n_planes = planes.planes.len();

    let columns = (0..x.cols())
        .into_par_iter()
        .map(|n| {
            let mut acc = vec![0i32; rows];
            let mut census = Census::default();
            let mut a = vec![0i32; c];
            for g in 0..chunks {
                chunk_of(x, n, g, c, &mut a);
                let (table, adds) = build_table(&a, path, opts);
                census.construct_adds += adds;
                for (r, slot) in acc.iter_mut().enumerate() {
                    let mut merged = 0i32;
                    for (p, stream) in packed.iter().enumerate() {
                        let v = lookup(&table, path, stream.bytes[r * chunks + g])?;
                        merged += planes.plane_weights[p] * v;
                    }
                    census.merge_adds += n_planes as u64 - 1;
                    if g == 0 {
                        *slot = merged;
                    } else {
                        *slot += merged;
                        census.reduce_adds += 1;
                    }
                }
                census.queries += (rows * n_planes) as u64;
            }
            Ok((acc, census))
        })
        .collect::<Result<Vec<_>, KernelError>>()?;

    Ok(assemble(rows, x.cols(), columns))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaiveResult {
    pub output: OutputMatrix,
    /// One addition per weight–activation product (M·K·N), or per non-zero weight if
    /// zero skipping was requested.
    pub adds: u64,
}

/// Textbook integer GEMM.
pub fn naive_gemm(w: &Matrix<i32>, x: &ActivationMatrix) -> Result<NaiveResult, KernelError> {
    naive_gemm_with(w, x, false)
}

pub fn naive_gemm_with(w: &Matrix<i32>, x: &ActivationMatrix, skip_zeros: bool) -> Result<NaiveResult, KernelError> {
    if w.cols() != x.rows() {
        return Err(KernelError::ShapeMismatch {
            left: (w.rows(), w.cols()),
            right: (x.rows(), x.cols()),
        });
    }
    let (m, k, n) = (w.rows(), w.cols(), x.cols());
    let xs = x.matrix();
    let mut out = Matrix::<i32>::zeros(m, n);
    let mut adds = 0u64;
    for r in 0..m {
        let row = w.row(r);
        for (kk, &wv) in row.iter().enumerate() {
            if skip_zeros && wv == 0 {
                continue;
            }
            adds += n as u64;
            let xrow = xs.row(kk);
            for (col, &xv) in xrow.iter().enumerate() {
                let v = *out.get(r, col) + wv * xv;
                out.set(r, col, v);
            }
        }
    }
    if !skip_zeros {
        debug_assert_eq!(adds, (m * k * n) as u64);
    }
    Ok(NaiveResult { output: out, adds })
}
