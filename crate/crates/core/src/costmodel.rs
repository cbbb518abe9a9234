//! Closed-form addition counts for LUT-based mpGEMM.
//!
//! Three strategies are modelled for a GEMM of an M×K weight matrix with a K×N activation
//! matrix, chunked c weights at a time:
//!
//! * bit-serial: a binary table of 2^c entries, c additions each, queried once per plane
//!   with the two plane results merged,
//! * naive ternary: a full 3^c table, c additions per entry,
//! * path-built ternary: ⌈3^c/2⌉ entries, one addition each, mirrors recovered by sign.
//!
//! The formulas are kept verbatim even though the path needs one addition less per chunk
//! (the zero entry is free); [`census_prediction`] gives the exact engine counts.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::weightcodec::bits_per_weight;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("GEMM dimensions must be positive, got M={m} K={k} N={n}")]
    EmptyShape { m: u64, k: u64, n: u64 },
    #[error("chunk size must be in 1..=20, got {0}")]
    ChunkSize(u32),
    #[error("empty chunk-size range")]
    EmptyRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GemmShape {
    pub m: u64,
    pub k: u64,
    pub n: u64,
}

impl GemmShape {
    pub fn new(m: u64, k: u64, n: u64) -> Result<Self, CostError> {
        if m == 0 || k == 0 || n == 0 {
            return Err(CostError::EmptyShape { m, k, n });
        }
        Ok(Self { m, k, n })
    }

    /// M·K·N: one addition per weight–activation product.
    pub fn naive_adds(&self) -> u64 {
        self.m * self.k * self.n
    }

    pub fn chunks(&self, c: u32) -> u64 {
        self.k.div_ceil(c as u64)
    }
}

/// Per-column addition terms of one strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddTerms {
    pub construct: u64,
    pub merge: u64,
    pub reduce: u64,
}

impl AddTerms {
    pub fn per_column(&self) -> u64 {
        self.construct + self.merge + self.reduce
    }
}

fn check_c(c: u32) -> Result<(), CostError> {
    if (1..=20).contains(&c) {
        Ok(())
    } else {
        Err(CostError::ChunkSize(c))
    }
}

/// Bit-serial terms for `planes` weight planes sharing one binary table per chunk.
pub fn bitserial_terms(shape: &GemmShape, c: u32, planes: u64) -> Result<AddTerms, CostError> {
    check_c(c)?;
    let g = shape.chunks(c);
    Ok(AddTerms {
        construct: g * c as u64 * (1u64 << c),
        merge: shape.m * g * planes.saturating_sub(1),
        reduce: shape.m * (g - 1),
    })
}

pub fn ternary_naive_terms(shape: &GemmShape, c: u32) -> Result<AddTerms, CostError> {
    check_c(c)?;
    let g = shape.chunks(c);
    Ok(AddTerms {
        construct: g * c as u64 * 3u64.pow(c),
        merge: 0,
        reduce: shape.m * (g - 1),
    })
}

pub fn ternary_path_terms(shape: &GemmShape, c: u32) -> Result<AddTerms, CostError> {
    check_c(c)?;
    let g = shape.chunks(c);
    Ok(AddTerms {
        construct: g * 3u64.pow(c).div_ceil(2),
        merge: 0,
        reduce: shape.m * (g - 1),
    })
}

/// [⌈K/c⌉·c·2^c + M·⌈K/c⌉ + M·(⌈K/c⌉−1)]·N
pub fn adds_bitserial(shape: &GemmShape, c: u32) -> Result<u64, CostError> {
    Ok(bitserial_terms(shape, c, 2)?.per_column() * shape.n)
}

/// [⌈K/c⌉·c·3^c + M·(⌈K/c⌉−1)]·N
pub fn adds_ternary_naive(shape: &GemmShape, c: u32) -> Result<u64, CostError> {
    Ok(ternary_naive_terms(shape, c)?.per_column() * shape.n)
}

/// [⌈K/c⌉·⌈3^c/2⌉ + M·(⌈K/c⌉−1)]·N
pub fn adds_ternary_path(shape: &GemmShape, c: u32) -> Result<u64, CostError> {
    Ok(ternary_path_terms(shape, c)?.per_column() * shape.n)
}

/// Counts the functional engine reports for the path-built ternary strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusPrediction {
    pub construct_adds: u64,
    pub queries: u64,
    pub merge_adds: u64,
    pub reduce_adds: u64,
}

/// Exact engine counts: ternary (`planes` = None) uses ⌈3^c/2⌉−1 additions per chunk,
/// bit-serial uses 2^c−1 per chunk shared by all planes.
pub fn census_prediction(shape: &GemmShape, c: u32, planes: Option<u64>) -> Result<CensusPrediction, CostError> {
    check_c(c)?;
    let g = shape.chunks(c);
    let (per_chunk, p) = match planes {
        None => (3u64.pow(c).div_ceil(2) - 1, 1),
        Some(p) => ((1u64 << c) - 1, p),
    };
    Ok(CensusPrediction {
        construct_adds: g * per_chunk * shape.n,
        queries: g * shape.m * p * shape.n,
        merge_adds: g * shape.m * p.saturating_sub(1) * shape.n,
        reduce_adds: shape.m * (g - 1) * shape.n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Naive,
    Bitserial,
    TernaryNaive,
    TernaryPath,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Naive, Method::Bitserial, Method::TernaryNaive, Method::TernaryPath];

    pub fn name(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Bitserial => "bitserial",
            Method::TernaryNaive => "ternary_naive",
            Method::TernaryPath => "ternary_path",
        }
    }

    pub fn adds(self, shape: &GemmShape, c: u32) -> Result<u64, CostError> {
        match self {
            Method::Naive => Ok(shape.naive_adds()),
            Method::Bitserial => adds_bitserial(shape, c),
            Method::TernaryNaive => adds_ternary_naive(shape, c),
            Method::TernaryPath => adds_ternary_path(shape, c),
        }
    }
}

/// One CSV row: `c,method,adds,reduction`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: u32,
    pub method: Method,
    pub adds: u64,
    /// Naive adds divided by this method's adds.
    pub reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkSweep {
    pub shape: GemmShape,
    pub rows: Vec<SweepRow>,
}

impl ChunkSweep {
    /// Chunk size with the fewest additions for `method` (smallest c on ties).
    pub fn argmin(&self, method: Method) -> Option<u32> {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .min_by_key(|r| (r.adds, r.c))
            .map(|r| r.c)
    }

    pub fn adds(&self, method: Method, c: u32) -> Option<u64> {
        self.rows.iter().find(|r| r.method == method && r.c == c).map(|r| r.adds)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["c", "method", "adds", "reduction"]).unwrap();
        for r in &self.rows {
            w.write_record([
                r.c.to_string(),
                r.method.name().to_string(),
                r.adds.to_string(),
                format!("{:.6}", r.reduction),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn sweep_chunk_size(shape: &GemmShape, c_range: impl IntoIterator<Item = u32>) -> Result<ChunkSweep, CostError> {
    let naive = shape.naive_adds() as f64;
    let mut rows = Vec::new();
    for c in c_range {
        check_c(c)?;
        for method in Method::ALL {
            let adds = method.adds(shape, c)?;
            rows.push(SweepRow {
                c,
                method,
                adds,
                reduction: naive / adds as f64,
            });
        }
    }
    if rows.is_empty() {
        return Err(CostError::EmptyRange);
    }
    Ok(ChunkSweep { shape: *shape, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingRow {
    pub c: u32,
    pub bits_per_weight: f64,
    pub bits_num: u64,
    pub bits_den: u64,
    /// Lowest bits/weight among chunk sizes whose code fits in one byte.
    pub byte_aligned_min: bool,
}

pub fn encoding_sweep(c_range: impl IntoIterator<Item = u32>) -> Result<Vec<EncodingRow>, CostError> {
    let mut rows: Vec<EncodingRow> = Vec::new();
    for c in c_range {
        check_c(c)?;
        let r: Ratio<u64> = bits_per_weight(c);
        let bits_total = r * Ratio::from_integer(c as u64);
        rows.push(EncodingRow {
            c,
            bits_per_weight: *r.numer() as f64 / *r.denom() as f64,
            bits_num: *bits_total.numer(),
            bits_den: c as u64,
            byte_aligned_min: false,
        });
    }
    if rows.is_empty() {
        return Err(CostError::EmptyRange);
    }
    let best = rows
        .iter()
        .filter(|r| r.bits_num <= 8)
        .map(|r| Ratio::new(r.bits_num, r.bits_den))
        .min();
    if let Some(best) = best {
        for r in rows.iter_mut() {
            r.byte_aligned_min = r.bits_num <= 8 && Ratio::new(r.bits_num, r.bits_den) == best;
        }
    }
    Ok(rows)
}

pub fn encoding_csv(rows: &[EncodingRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["c", "bits_per_weight", "byte_aligned_min"]).unwrap();
    for r in rows {
        w.write_record([
            r.c.to_string(),
            format!("{:.6}", r.bits_per_weight),
            r.byte_aligned_min.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: u64, k: u64, n: u64) -> GemmShape {
        GemmShape::new(m, k, n).unwrap()
    }

    #[test]
    fn bitserial_values() {
        assert_eq!(adds_bitserial(&s(4, 2, 1), 2).unwrap(), 12);
        assert_eq!(adds_bitserial(&s(1080, 5, 1), 5).unwrap(), 1240);
        assert_eq!(adds_bitserial(&s(1080, 5, 2), 5).unwrap(), 2480);
    }

    #[test]
    fn ternary_naive_values() {
        assert_eq!(adds_ternary_naive(&s(1080, 5, 1), 5).unwrap(), 1215);
        assert_eq!(adds_ternary_naive(&s(1080, 10, 1), 5).unwrap(), 3510);
        assert_eq!(adds_ternary_naive(&s(7, 1, 3), 1).unwrap(), 9);
    }

    #[test]
    fn ternary_path_values() {
        assert_eq!(adds_ternary_path(&s(1080, 10, 1), 5).unwrap(), 1324);
        assert_eq!(adds_ternary_path(&s(1080, 3, 1), 5).unwrap(), 122);
        let ratio = ternary_naive_terms(&s(1, 5, 1), 5).unwrap().construct as f64
            / ternary_path_terms(&s(1, 5, 1), 5).unwrap().construct as f64;
        assert!((ratio - 9.959).abs() < 1e-3);
    }

    #[test]
    fn invalid_inputs() {
        assert!(GemmShape::new(1, 1, 0).is_err());
        assert!(adds_bitserial(&s(1, 1, 1), 0).is_err());
        assert!(sweep_chunk_size(&s(1, 1, 1), std::iter::empty()).is_err());
    }

    #[test]
    fn sweep_naive_row_is_flat() {
        let sw = sweep_chunk_size(&s(1080, 3200, 1), 2..=8).unwrap();
        for c in 2..=8 {
            assert_eq!(sw.adds(Method::Naive, c), Some(1080 * 3200));
        }
        assert_eq!(sw.rows.len(), 7 * 4);
        let csv = sw.to_csv();
        assert!(csv.starts_with("c,method,adds,reduction\n"));
        assert_eq!(csv.lines().count(), 29);
    }

    #[test]
    fn reduction_degrades_for_large_c() {
        let sw = sweep_chunk_size(&s(1080, 3200, 1), 1..=12).unwrap();
        let best = sw.argmin(Method::TernaryPath).unwrap();
        assert!(best > 1 && best < 12);
        assert!(sw.adds(Method::TernaryPath, 12) > sw.adds(Method::TernaryPath, best));
    }

    #[test]
    fn encoding_rows() {
        let rows = encoding_sweep(1..=10).unwrap();
        assert_eq!(rows[4].bits_per_weight, 1.6);
        assert_eq!(rows[0].bits_per_weight, 2.0);
        assert_eq!(rows[9].bits_per_weight, 1.6);
        let flagged: Vec<u32> = rows.iter().filter(|r| r.byte_aligned_min).map(|r| r.c).collect();
        assert_eq!(flagged, vec![5]);
    }

    #[test]
    fn census_prediction_matches_hand_counts() {
        let p = census_prediction(&s(1080, 10, 1), 5, None).unwrap();
        assert_eq!((p.construct_adds, p.queries, p.reduce_adds), (242, 2160, 1080));
        let b = census_prediction(&s(16, 14, 3), 7, Some(2)).unwrap();
        assert_eq!((b.construct_adds, b.queries, b.merge_adds), (2 * 127 * 3, 2 * 16 * 2 * 3, 2 * 16 * 3));
    }
}
