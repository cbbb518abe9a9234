use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ExecMode, HardwareConfig, SimError};

/// Loop nest order over the m, n and k tile indices, outermost first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stationarity {
    Mnk,
    Mkn,
    Nmk,
    Nkm,
    Kmn,
    Knm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Dim {
    M,
    N,
    K,
}

impl Stationarity {
    pub const ALL: [Stationarity; 6] = [
        Stationarity::Mnk,
        Stationarity::Mkn,
        Stationarity::Nmk,
        Stationarity::Nkm,
        Stationarity::Kmn,
        Stationarity::Knm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stationarity::Mnk => "mnk",
            Stationarity::Mkn => "mkn",
            Stationarity::Nmk => "nmk",
            Stationarity::Nkm => "nkm",
            Stationarity::Kmn => "kmn",
            Stationarity::Knm => "knm",
        }
    }

    pub(crate) fn order(self) -> [Dim; 3] {
        use Dim::*;
        match self {
            Stationarity::Mnk => [M, N, K],
            Stationarity::Mkn => [M, K, N],
            Stationarity::Nmk => [N, M, K],
            Stationarity::Nkm => [N, K, M],
            Stationarity::Kmn => [K, M, N],
            Stationarity::Knm => [K, N, M],
        }
    }
}

impl fmt::Display for Stationarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stationarity {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stationarity::ALL
            .into_iter()
            .find(|st| st.name() == s.to_ascii_lowercase())
            .ok_or_else(|| SimError::InvalidSchedule(format!("unknown stationarity '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileSchedule {
    pub m_tile: u64,
    pub k_tile: u64,
    pub n_tile: u64,
    pub stationarity: Stationarity,
}

/// Which on-chip buffer a schedule overflows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferKind {
    Weight,
    Input,
    Output,
    Path,
    Lut,
}

impl fmt::Display for BufferKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BufferKind::Weight => "weight",
            BufferKind::Input => "input",
            BufferKind::Output => "output",
            BufferKind::Path => "path",
            BufferKind::Lut => "lut",
        };
        f.write_str(s)
    }
}

/// Bytes each buffer must hold for one tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileFootprint {
    pub weight: u64,
    pub input: u64,
    pub output: u64,
    pub path: u64,
}

impl TileFootprint {
    pub fn total(&self) -> u64 {
        self.weight + self.input + self.output + self.path
    }
}

impl TileSchedule {
    /// Default for the mode: 1080 rows, two full PPE rounds of K (one for bit-serial), 32 columns.
    pub fn default_for(cfg: &HardwareConfig, mode: ExecMode) -> Self {
        let k_tile = match mode {
            ExecMode::Ternary => 2 * cfg.l as u64 * cfg.c as u64,
            ExecMode::BitSerial { .. } => cfg.l as u64 * cfg.bitserial_c as u64,
        };
        TileSchedule {
            m_tile: 1080,
            k_tile,
            n_tile: 32,
            stationarity: Stationarity::Mnk,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidSchedule(e.to_string()))
    }

    /// Weight bytes for an m×k tile: one byte per chunk per plane.
    pub fn weight_bytes(m: u64, k: u64, chunk: u64, planes: u64) -> u64 {
        planes * m * k.div_ceil(chunk)
    }

    pub fn footprint(&self, cfg: &HardwareConfig, mode: ExecMode, path_bytes: u64) -> TileFootprint {
        TileFootprint {
            weight: Self::weight_bytes(self.m_tile, self.k_tile, mode.chunk(cfg), mode.planes()),
            input: self.k_tile * self.n_tile,
            output: self.m_tile * self.n_tile * cfg.psum_bytes as u64,
            path: path_bytes,
        }
    }

    /// Structural checks: positive sizes and K tiles aligned to chunks.
    pub fn validate(&self, cfg: &HardwareConfig, mode: ExecMode) -> Result<(), SimError> {
        if self.m_tile == 0 || self.k_tile == 0 || self.n_tile == 0 {
            return Err(SimError::InvalidSchedule("tile sizes must be positive".into()));
        }
        let chunk = mode.chunk(cfg);
        if !self.k_tile.is_multiple_of(chunk) {
            return Err(SimError::InvalidSchedule(format!(
                "k_tile {} is not a multiple of the chunk size {chunk}",
                self.k_tile
            )));
        }
        Ok(())
    }

    /// Capacity check against every buffer.
    pub fn check_fits(&self, cfg: &HardwareConfig, mode: ExecMode, path_bytes: u64) -> Result<TileFootprint, SimError> {
        let fp = self.footprint(cfg, mode, path_bytes);
        let b = &cfg.buffers;
        for (kind, required, available) in [
            (BufferKind::Weight, fp.weight, b.weight),
            (BufferKind::Input, fp.input, b.input),
            (BufferKind::Output, fp.output, b.output),
            (BufferKind::Path, fp.path, b.path),
            (BufferKind::Lut, cfg.lut_bytes_required(), b.lut),
        ] {
            if required > available {
                return Err(SimError::InfeasibleSchedule {
                    buffer: kind,
                    required,
                    available,
                });
            }
        }
        Ok(fp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedules() {
        let cfg = HardwareConfig::default();
        let t = TileSchedule::default_for(&cfg, ExecMode::Ternary);
        assert_eq!((t.m_tile, t.k_tile, t.n_tile, t.stationarity), (1080, 520, 32, Stationarity::Mnk));
        let b = TileSchedule::default_for(&cfg, ExecMode::BitSerial { planes: 2 });
        assert_eq!(b.k_tile, 364);
    }

    #[test]
    fn default_tile_fits_exactly() {
        let cfg = HardwareConfig::default();
        let t = TileSchedule::default_for(&cfg, ExecMode::Ternary);
        let fp = t.check_fits(&cfg, ExecMode::Ternary, 495).unwrap();
        assert_eq!(fp.weight, 1080 * 104);
        assert_eq!(fp.input, 520 * 32);
        assert_eq!(fp.output, 1080 * 32 * 4);
        assert_eq!(fp.output, cfg.buffers.output);
    }

    #[test]
    fn larger_m_overflows_output() {
        let cfg = HardwareConfig::default();
        let mut t = TileSchedule::default_for(&cfg, ExecMode::Ternary);
        t.m_tile = 1088;
        assert!(matches!(
            t.check_fits(&cfg, ExecMode::Ternary, 495),
            Err(SimError::InfeasibleSchedule { buffer: BufferKind::Output, .. })
        ));
    }

    #[test]
    fn k_tile_alignment() {
        let cfg = HardwareConfig::default();
        let mut t = TileSchedule::default_for(&cfg, ExecMode::Ternary);
        assert!(t.validate(&cfg, ExecMode::BitSerial { planes: 2 }).is_err());
        t.k_tile = 523;
        assert!(t.validate(&cfg, ExecMode::Ternary).is_err());
        t.k_tile = 0;
        assert!(t.validate(&cfg, ExecMode::Ternary).is_err());
    }

    #[test]
    fn stationarity_parse() {
        for s in Stationarity::ALL {
            assert_eq!(s.name().parse::<Stationarity>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("mmk".parse::<Stationarity>().is_err());
    }
}
