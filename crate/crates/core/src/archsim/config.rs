use serde::{Deserialize, Serialize};

use super::SimError;

const DEFAULT_JSON: &str = include_str!("../../data/hardware_default.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutPorts {
    /// Read-write ports per LUT; construction writes through one of these.
    pub rw: u32,
    /// Additional read-only ports.
    pub ro: u32,
}

impl LutPorts {
    pub fn reads_per_cycle(&self) -> u32 {
        self.rw + self.ro
    }
}

/// On-chip buffer capacities in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferSizes {
    pub weight: u64,
    pub input: u64,
    pub output: u64,
    pub path: u64,
    /// All PPE tables together.
    pub lut: u64,
}

impl BufferSizes {
    /// Every buffer except the LUTs.
    pub fn sram_total(&self) -> u64 {
        self.weight + self.input + self.output + self.path
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DramConfig {
    pub bandwidth_gbps: f64,
    /// Fixed cost of each transfer before data streams.
    pub latency_cycles: u64,
    pub pj_per_bit: f64,
    /// Row activation and command overhead of each transfer.
    pub pj_per_transfer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyConfig {
    #[serde(default)]
    pub note: String,
    pub adder_pj_per_lane: f64,
    pub lut_read_pj_per_byte: f64,
    pub lut_write_pj_per_byte: f64,
    pub weight_pj_per_byte: f64,
    pub input_pj_per_byte: f64,
    pub output_pj_per_byte: f64,
    pub path_pj_per_byte: f64,
    pub static_mw: f64,
}

/// Accelerator parameters. `Default` loads `data/hardware_default.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareConfig {
    /// Number of PPEs.
    pub l: u32,
    /// Ternary chunk size.
    pub c: u32,
    /// Binary chunk size used in bit-serial mode.
    pub bitserial_c: u32,
    /// Activation columns sharing one LUT row.
    pub n_cols: u32,
    pub pipeline_depth: u32,
    pub lut_ports: LutPorts,
    pub adders_per_ppe: u32,
    /// Adders outside the PPEs, in the aggregator.
    pub extra_adders: u32,
    pub freq_mhz: f64,
    pub lut_entry_bytes: u32,
    pub psum_bytes: u32,
    pub buffers: BufferSizes,
    pub dram: DramConfig,
    pub energy: EnergyConfig,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_JSON).expect("bundled hardware config parses")
    }
}

impl HardwareConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.l == 0 {
            return bad("L must be at least 1".into());
        }
        if self.n_cols == 0 {
            return bad("n_cols must be at least 1".into());
        }
        if self.pipeline_depth == 0 {
            return bad("pipeline_depth must be at least 1".into());
        }
        if self.lut_ports.rw == 0 {
            return bad("a LUT needs a read-write port".into());
        }
        if self.total_adders() < self.l {
            return bad(format!("{} adders cannot serve {} PPEs", self.total_adders(), self.l));
        }
        // written to reject NaN as well
        if !(self.freq_mhz > 0.0 && self.dram.bandwidth_gbps > 0.0) {
            return bad("frequency and DRAM bandwidth must be positive".into());
        }
        if self.psum_bytes == 0 || self.lut_entry_bytes == 0 {
            return bad("element widths must be positive".into());
        }
        let lut_need = self.lut_bytes_required();
        if lut_need > self.buffers.lut {
            return bad(format!(
                "LUTs need {lut_need} bytes, lut buffer holds {}",
                self.buffers.lut
            ));
        }
        Ok(())
    }

    pub fn total_adders(&self) -> u32 {
        self.l * self.adders_per_ppe + self.extra_adders
    }

    /// Table rows per PPE: the larger of the ternary and binary stored-entry counts.
    pub fn lut_rows(&self) -> u64 {
        let ternary = 3u64.pow(self.c).div_ceil(2);
        let binary = 1u64 << self.bitserial_c;
        ternary.max(binary)
    }

    pub fn lut_bytes_required(&self) -> u64 {
        self.l as u64 * self.lut_rows() * self.n_cols as u64 * self.lut_entry_bytes as u64
    }

    pub fn dram_bytes_per_cycle(&self) -> f64 {
        self.dram.bandwidth_gbps * 1e3 / self.freq_mhz
    }

    /// Aggregator tree depth plus the final accumulate.
    pub fn drain_cycles(&self) -> u64 {
        let depth = u32::BITS - (self.l - 1).leading_zeros();
        depth as u64 + 1
    }
}
