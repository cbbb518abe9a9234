//! `PLTP` build-path files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "PLTP" | version u8 | mode u8 | c u8 | pipeline_depth u8 | step_count u16
//! step_count × { dst u8, src u8, (j << 1 | sign) u8 }
//! stored_entries × u8   LUT address of each stored code, in code order
//! ```

use sha2::{Digest, Sha256};

use super::config::{ChunkConfig, LutMode};
use super::path::{BuildPath, CanonicalMap, PathStep};
use super::PathError;

pub const PATH_MAGIC: &[u8; 4] = b"PLTP";
pub const PATH_VERSION: u8 = 1;
const HEADER_LEN: usize = 10;

pub fn encode_path(path: &BuildPath) -> Vec<u8> {
    let cfg = &path.config;
    let mut out = Vec::with_capacity(HEADER_LEN + 3 * path.steps.len() + path.canonical_map.len());
    out.extend_from_slice(PATH_MAGIC);
    out.push(PATH_VERSION);
    out.push(cfg.mode().code());
    out.push(cfg.c() as u8);
    out.push(cfg.pipeline_depth() as u8);
    out.extend_from_slice(&(path.steps.len() as u16).to_le_bytes());
    for s in &path.steps {
        out.extend_from_slice(&[s.dst, s.src, s.op_byte()]);
    }
    out.extend_from_slice(path.canonical_map.perm());
    out
}

pub fn decode_path(bytes: &[u8]) -> Result<BuildPath, PathError> {
    let bad = |msg: &str| PathError::Format(msg.to_string());
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[0..4] != PATH_MAGIC {
        return Err(bad("bad magic, expected PLTP"));
    }
    if bytes[4] != PATH_VERSION {
        return Err(PathError::Format(format!("unsupported version {}", bytes[4])));
    }
    let mode = LutMode::from_code(bytes[5]).ok_or_else(|| bad("unknown mode"))?;
    let config = ChunkConfig::new(mode, bytes[6] as usize, bytes[7] as usize)?;
    let step_count = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let stored = config.stored_entries();
    let expected_len = HEADER_LEN + 3 * step_count + stored;
    if bytes.len() != expected_len {
        return Err(PathError::Format(format!(
            "expected {expected_len} bytes, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[HEADER_LEN..];
    let steps = body[..3 * step_count]
        .chunks_exact(3)
        .map(|r| PathStep {
            dst: r[0],
            src: r[1],
            j: r[2] >> 1,
            sign: r[2] & 1,
        })
        .collect();
    let canonical_map = CanonicalMap::from_perm(body[3 * step_count..].to_vec())?;
    Ok(BuildPath {
        config,
        steps,
        canonical_map,
    })
}

/// Identity of a path as seen by packed weight streams: the first eight bytes of the
/// SHA-256 of its encoded file, read little-endian.
pub fn path_hash(path: &BuildPath) -> u64 {
    let digest = Sha256::digest(encode_path(path));
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Human-readable dump mirroring the binary fields.
pub fn path_to_json(path: &BuildPath) -> serde_json::Value {
    serde_json::json!({
        "magic": "PLTP",
        "version": PATH_VERSION,
        "mode": path.config.mode(),
        "c": path.config.c(),
        "pipeline_depth": path.config.pipeline_depth(),
        "step_count": path.steps.len(),
        "steps": path.steps,
        "canonical_map": path.canonical_map.perm(),
        "path_hash": format!("{:016x}", path_hash(path)),
    })
}
