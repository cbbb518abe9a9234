use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::pathgen::{BuildPath, LutMode, PathInstr};
use crate::weightcodec::{ADDRESS_MASK, SIGN_BIT};

/// Numeric width of LUT entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LutPrecision {
    /// 32-bit entries; exact for every supported activation width.
    #[default]
    Wide,
    /// Experimental: 8-bit entries that clamp to [-128, 127] on every construction step and on negation.
    Saturating8,
    /// Experimental: 8-bit entries with two's-complement wraparound.
    Wrapping8,
}

impl LutPrecision {
    fn narrow(self, v: i32) -> i32 {
        match self {
            LutPrecision::Wide => v,
            LutPrecision::Saturating8 => v.clamp(i8::MIN as i32, i8::MAX as i32),
            LutPrecision::Wrapping8 => v as i8 as i32,
        }
    }
}

/// One constructed lookup table for a single activation chunk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lut {
    pub entries: Vec<i32>,
    pub mode: LutMode,
    pub precision: LutPrecision,
}

impl Lut {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Runs the build path over an activation chunk until `Finish`.
/// Returns the table and the number of additions performed.
pub fn construct_lut(a: &[i32], path: &BuildPath) -> (Lut, u64) {
    construct_lut_with(a, path, LutPrecision::Wide)
}

pub fn construct_lut_with(a: &[i32], path: &BuildPath, precision: LutPrecision) -> (Lut, u64) {
    debug_assert_eq!(a.len(), path.config.c());
    let mut entries = vec![0i32; path.config.stored_entries()];
    let mut adds = 0;
    for instr in path.program() {
        let PathInstr::Step(step) = instr else { break };
        let input = a[step.j as usize];
        let term = if step.sign == 0 { input } else { -input };
        entries[step.dst as usize] = precision.narrow(entries[step.src as usize] + term);
        adds += 1;
    }
    (
        Lut {
            entries,
            mode: path.config.mode(),
            precision,
        },
        adds,
    )
}

/// Looks up a packed weight byte: the addressed entry, negated when bit 7 is set.
pub fn query(lut: &Lut, byte: u8) -> Result<i32, KernelError> {
    let address = byte & ADDRESS_MASK;
    let value = *lut.entries.get(address as usize).ok_or(KernelError::BadAddress {
        address,
        stored: lut.entries.len(),
    })?;
    Ok(if byte & SIGN_BIT != 0 {
        lut.precision.narrow(-value)
    } else {
        value
    })
}
