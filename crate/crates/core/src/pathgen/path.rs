use serde::{Deserialize, Serialize};

use super::config::ChunkConfig;
use super::PathError;

/// One construction instruction: `lut[dst] = lut[src] + flip(a_j, sign)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathStep {
    pub dst: u8,
    pub src: u8,
    pub j: u8,
    /// 0 adds the input element, 1 subtracts it.
    pub sign: u8,
}

impl PathStep {
    /// Packs `j` and `sign` into the third byte of a path record.
    pub fn op_byte(&self) -> u8 {
        (self.j << 1) | (self.sign & 1)
    }
}

/// What the construction front-end fetches from the path buffer each cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathInstr {
    Step(PathStep),
    Finish,
}

/// Bijection between stored value codes and sequential LUT addresses.
///
/// Stored codes are `0..stored_entries`, so `perm` is indexed directly by code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct CanonicalMap {
    perm: Vec<u8>,
    inverse: Vec<u32>,
}

impl CanonicalMap {
    pub fn from_perm(perm: Vec<u8>) -> Result<Self, PathError> {
        let n = perm.len();
        let mut inverse = vec![u32::MAX; n];
        for (code, &addr) in perm.iter().enumerate() {
            let addr = addr as usize;
            if addr >= n || inverse[addr] != u32::MAX {
                return Err(PathError::InvalidMap(format!(
                    "address {addr} for code {code} is out of range or repeated"
                )));
            }
            inverse[addr] = code as u32;
        }
        Ok(CanonicalMap { perm, inverse })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// LUT address of a stored code.
    pub fn address(&self, code: u32) -> Option<u8> {
        self.perm.get(code as usize).copied()
    }

    /// Stored code held at a LUT address.
    pub fn code_at(&self, address: u8) -> Option<u32> {
        self.inverse.get(address as usize).copied()
    }

    pub fn perm(&self) -> &[u8] {
        &self.perm
    }
}

impl TryFrom<Vec<u8>> for CanonicalMap {
    type Error = PathError;

    fn try_from(perm: Vec<u8>) -> Result<Self, Self::Error> {
        CanonicalMap::from_perm(perm)
    }
}

impl From<CanonicalMap> for Vec<u8> {
    fn from(map: CanonicalMap) -> Self {
        map.perm
    }
}

/// Offline-compiled LUT construction program plus the address permutation it implies.
///
/// Nothing here is checked at construction time; run
/// [`verify_path`](super::verify::verify_path) before trusting a path from outside.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildPath {
    pub config: ChunkConfig,
    pub steps: Vec<PathStep>,
    pub canonical_map: CanonicalMap,
}

impl BuildPath {
    /// The instruction stream as fetched by hardware, terminated by `Finish`.
    pub fn program(&self) -> impl Iterator<Item = PathInstr> + '_ {
        self.steps
            .iter()
            .copied()
            .map(PathInstr::Step)
            .chain(std::iter::once(PathInstr::Finish))
    }

    /// Smallest read-after-write distance in steps, ignoring reads of address 0.
    /// `None` when no step reads a constructed entry.
    pub fn min_raw_distance(&self) -> Option<usize> {
        let mut written_at = vec![None; self.canonical_map.len().max(1 << 7)];
        let mut min = None::<usize>;
        for (pos, step) in self.steps.iter().enumerate() {
            if step.src != 0 {
                if let Some(w) = written_at[step.src as usize] {
                    let d = pos - w;
                    min = Some(min.map_or(d, |m| m.min(d)));
                }
            }
            written_at[step.dst as usize] = Some(pos);
        }
        min
    }

    /// Address and mirror flag for a (not necessarily canonical) value code.
    pub fn locate(&self, code: u32) -> Option<(u8, bool)> {
        let (canonical, flipped) = self.config.canonicalize(code);
        self.canonical_map.address(canonical).map(|a| (a, flipped))
    }
}
