use serde::{Deserialize, Serialize};

use super::PathError;

/// Largest LUT address representable in the 7 index bits of a packed weight byte.
pub const MAX_STORED_ENTRIES: usize = 1 << 7;

/// Weight alphabet a LUT is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LutMode {
    /// Weights in {-1, 0, 1}, mirror pairs folded into one stored entry.
    Ternary,
    /// Weights in {0, 1}, every subset stored.
    Binary,
}

impl LutMode {
    /// Wire code used by the build-path and packed-weight files.
    pub fn code(self) -> u8 {
        match self {
            LutMode::Ternary => 0,
            LutMode::Binary => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(LutMode::Ternary),
            1 => Some(LutMode::Binary),
            _ => None,
        }
    }

    /// Number of weight values per element (3 or 2).
    pub fn radix(self) -> u32 {
        match self {
            LutMode::Ternary => 3,
            LutMode::Binary => 2,
        }
    }
}

impl std::fmt::Display for LutMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LutMode::Ternary => f.write_str("ternary"),
            LutMode::Binary => f.write_str("binary"),
        }
    }
}

impl std::str::FromStr for LutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ternary" => Ok(LutMode::Ternary),
            "binary" => Ok(LutMode::Binary),
            other => Err(format!("unknown LUT mode '{other}'")),
        }
    }
}

/// Chunk geometry of one LUT: weight alphabet, elements per chunk and the depth of the
/// construction pipeline the build path must be hazard-free for.
///
/// Value codes are little-endian digit sums: ternary `v = Σ (w_i + 1)·3^i`, binary
/// `v = Σ w_i·2^i`. In ternary mode a code is canonical iff `v ≤ (3^c − 1)/2`; its mirror
/// partner is `3^c − 1 − v`. The canonical codes are therefore exactly `0..stored_entries()`
/// in both modes, so a code doubles as its own rank among stored entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawChunkConfig", into = "RawChunkConfig")]
pub struct ChunkConfig {
    mode: LutMode,
    c: usize,
    pipeline_depth: usize,
}

#[derive(Serialize, Deserialize)]
struct RawChunkConfig {
    mode: LutMode,
    c: usize,
    pipeline_depth: usize,
}

impl TryFrom<RawChunkConfig> for ChunkConfig {
    type Error = PathError;

    fn try_from(raw: RawChunkConfig) -> Result<Self, Self::Error> {
        ChunkConfig::new(raw.mode, raw.c, raw.pipeline_depth)
    }
}

impl From<ChunkConfig> for RawChunkConfig {
    fn from(cfg: ChunkConfig) -> Self {
        RawChunkConfig {
            mode: cfg.mode,
            c: cfg.c,
            pipeline_depth: cfg.pipeline_depth,
        }
    }
}

impl ChunkConfig {
    pub fn new(mode: LutMode, c: usize, pipeline_depth: usize) -> Result<Self, PathError> {
        if c == 0 {
            return Err(PathError::InvalidConfig("chunk size must be at least 1".into()));
        }
        if pipeline_depth == 0 || pipeline_depth > u8::MAX as usize {
            return Err(PathError::InvalidConfig(format!(
                "pipeline depth {pipeline_depth} outside 1..=255"
            )));
        }
        // Bound c before computing radix^c so the check itself cannot overflow.
        if c > 7 || stored_entries_for(mode, c) > MAX_STORED_ENTRIES {
            return Err(PathError::InvalidConfig(format!(
                "{mode} chunk of {c} needs more than {MAX_STORED_ENTRIES} LUT entries"
            )));
        }
        Ok(ChunkConfig {
            mode,
            c,
            pipeline_depth,
        })
    }

    /// Ternary c=5 with the four-stage construction pipeline.
    pub fn ternary_default() -> Self {
        ChunkConfig::new(LutMode::Ternary, 5, 4).expect("valid default")
    }

    /// Binary c=7 (bit-serial mode) with the four-stage construction pipeline.
    pub fn binary_default() -> Self {
        ChunkConfig::new(LutMode::Binary, 7, 4).expect("valid default")
    }

    pub fn mode(&self) -> LutMode {
        self.mode
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn pipeline_depth(&self) -> usize {
        self.pipeline_depth
    }

    /// Number of distinct weight vectors of length c (3^c or 2^c).
    pub fn full_space(&self) -> u32 {
        self.mode.radix().pow(self.c as u32)
    }

    /// Number of entries physically stored in the LUT.
    pub fn stored_entries(&self) -> usize {
        stored_entries_for(self.mode, self.c)
    }

    /// Value code of the all-zero vector.
    pub fn zero_code(&self) -> u32 {
        match self.mode {
            LutMode::Ternary => (self.full_space() - 1) / 2,
            LutMode::Binary => 0,
        }
    }

    pub fn is_canonical(&self, code: u32) -> bool {
        match self.mode {
            LutMode::Ternary => code <= self.zero_code(),
            LutMode::Binary => code < self.full_space(),
        }
    }

    /// Code of the negated vector. Only meaningful in ternary mode.
    pub fn mirror(&self, code: u32) -> u32 {
        self.full_space() - 1 - code
    }

    /// Folds a code onto its stored representative; the flag is set when the mirror was taken.
    pub fn canonicalize(&self, code: u32) -> (u32, bool) {
        match self.mode {
            LutMode::Ternary if !self.is_canonical(code) => (self.mirror(code), true),
            _ => (code, false),
        }
    }

    /// Encodes a weight vector of length c. Returns `None` when a value is outside the alphabet.
    pub fn encode(&self, vector: &[i8]) -> Option<u32> {
        if vector.len() != self.c {
            return None;
        }
        let radix = self.mode.radix();
        let mut code = 0u32;
        let mut place = 1u32;
        for &w in vector {
            let digit = match (self.mode, w) {
                (LutMode::Ternary, -1..=1) => (w + 1) as u32,
                (LutMode::Binary, 0..=1) => w as u32,
                _ => return None,
            };
            code += digit * place;
            place *= radix;
        }
        Some(code)
    }

    pub fn decode(&self, code: u32) -> Vec<i8> {
        let radix = self.mode.radix();
        let offset = match self.mode {
            LutMode::Ternary => 1,
            LutMode::Binary => 0,
        };
        let mut rest = code;
        (0..self.c)
            .map(|_| {
                let digit = (rest % radix) as i8;
                rest /= radix;
                digit - offset
            })
            .collect()
    }
}

fn stored_entries_for(mode: LutMode, c: usize) -> usize {
    let full = mode.radix().pow(c as u32) as usize;
    match mode {
        LutMode::Ternary => full.div_ceil(2),
        LutMode::Binary => full,
    }
}

/// One stored LUT entry: the weight vector it answers for and its value code.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LutEntryId {
    pub vector: Vec<i8>,
    pub value_code: u32,
}

/// All stored entries of a configuration, ordered by value code.
pub fn enumerate_entries(config: &ChunkConfig) -> Vec<LutEntryId> {
    (0..config.full_space())
        .filter(|&code| config.is_canonical(code))
        .map(|code| LutEntryId {
            vector: config.decode(code),
            value_code: code,
        })
        .collect()
}
