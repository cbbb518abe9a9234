use std::collections::HashMap;
use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::round::{simulate_round_with, RoundStats};
use super::schedule::{Dim, TileSchedule};
use super::{HardwareConfig, SimError};
use crate::lutkernel::Census;
use crate::pathgen::{encode_path, generate_path, BuildPath, ChunkConfig, LutMode};

/// Which build path the PPEs run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExecMode {
    /// Mirror-folded ternary LUT, one query per weight chunk.
    Ternary,
    /// Binary LUT shared by `planes` weight planes.
    BitSerial { planes: u32 },
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::Ternary => "ternary",
            ExecMode::BitSerial { .. } => "bitserial",
        }
    }

    pub fn chunk(self, cfg: &HardwareConfig) -> u64 {
        match self {
            ExecMode::Ternary => cfg.c as u64,
            ExecMode::BitSerial { .. } => cfg.bitserial_c as u64,
        }
    }

    pub fn planes(self) -> u64 {
        match self {
            ExecMode::Ternary => 1,
            ExecMode::BitSerial { planes } => planes as u64,
        }
    }

    pub fn chunk_config(self, cfg: &HardwareConfig) -> Result<ChunkConfig, SimError> {
        let mode = match self {
            ExecMode::Ternary => LutMode::Ternary,
            ExecMode::BitSerial { .. } => LutMode::Binary,
        };
        Ok(ChunkConfig::new(mode, self.chunk(cfg) as usize, cfg.pipeline_depth as usize)?)
    }
}

impl fmt::Display for ExecMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ternary" => Ok(ExecMode::Ternary),
            "bitserial" | "bit-serial" => Ok(ExecMode::BitSerial { planes: 2 }),
            _ => Err(SimError::InvalidConfig(format!("unknown mode '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelShape {
    pub name: String,
    pub m: u64,
    pub k: u64,
    pub n: u64,
}

impl KernelShape {
    pub fn new(name: impl Into<String>, m: u64, k: u64, n: u64) -> Self {
        KernelShape {
            name: name.into(),
            m,
            k,
            n,
        }
    }
}

/// Raw event counts. Everything reported is derived from these, so they add up across
/// kernels and scale with multiplicity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub construct_cycles: u64,
    pub query_cycles: u64,
    pub drain_cycles: u64,
    /// Cycles waiting on DRAM that double buffering could not hide.
    pub stall_cycles: u64,
    pub total_cycles: u64,
    pub tiles: u64,
    pub rounds: u64,
    pub interlock_cycles: u64,
    /// Vector adder operations, one per PPE step or query regardless of active columns.
    pub adder_ops: u64,
    pub construct_adder_ops: u64,
    /// Σ active PPEs × construct cycles in which a step issued.
    pub construct_issue_slots: u64,
    /// Adder operations times active columns.
    pub adder_lane_ops: u64,
    /// Σ round cycles × active PPEs.
    pub ppe_busy_cycles: u64,
    /// Σ round cycles × active PPEs × active columns.
    pub lane_busy_cycles: u64,
    pub lut_writes: u64,
    pub lut_reads_construct: u64,
    pub lut_reads_query: u64,
    /// Σ query cycles × read ports × active PPEs.
    pub lut_query_port_slots: u64,
    /// Σ construct cycles × ports × active PPEs.
    pub lut_construct_port_slots: u64,
    pub path_reads: u64,
    pub weight_buffer_bytes: u64,
    pub input_buffer_bytes: u64,
    pub output_buffer_bytes: u64,
    pub path_buffer_bytes: u64,
    pub dram_weight_bytes: u64,
    pub dram_input_bytes: u64,
    pub dram_psum_read_bytes: u64,
    pub dram_write_bytes: u64,
    pub dram_transfers: u64,
    pub census: Census,
    /// M·K·N of the kernel: the additions a naive GEMM would perform.
    pub naive_ops: u64,
    /// Weight bytes of a single pass over the matrix.
    pub weight_pass_bytes: u64,
}

impl Counters {
    pub fn round_cycles(&self) -> u64 {
        self.construct_cycles + self.query_cycles + self.drain_cycles
    }

    pub fn dram_read_bytes(&self) -> u64 {
        self.dram_weight_bytes + self.dram_input_bytes + self.dram_psum_read_bytes
    }

    pub fn scaled(&self, k: u64) -> Counters {
        let c = self;
        Counters {
            construct_cycles: c.construct_cycles * k,
            query_cycles: c.query_cycles * k,
            drain_cycles: c.drain_cycles * k,
            stall_cycles: c.stall_cycles * k,
            total_cycles: c.total_cycles * k,
            tiles: c.tiles * k,
            rounds: c.rounds * k,
            interlock_cycles: c.interlock_cycles * k,
            adder_ops: c.adder_ops * k,
            adder_lane_ops: c.adder_lane_ops * k,
            construct_adder_ops: c.construct_adder_ops * k,
            construct_issue_slots: c.construct_issue_slots * k,
            ppe_busy_cycles: c.ppe_busy_cycles * k,
            lane_busy_cycles: c.lane_busy_cycles * k,
            lut_writes: c.lut_writes * k,
            lut_reads_construct: c.lut_reads_construct * k,
            lut_reads_query: c.lut_reads_query * k,
            lut_query_port_slots: c.lut_query_port_slots * k,
            lut_construct_port_slots: c.lut_construct_port_slots * k,
            path_reads: c.path_reads * k,
            weight_buffer_bytes: c.weight_buffer_bytes * k,
            input_buffer_bytes: c.input_buffer_bytes * k,
            output_buffer_bytes: c.output_buffer_bytes * k,
            path_buffer_bytes: c.path_buffer_bytes * k,
            dram_weight_bytes: c.dram_weight_bytes * k,
            dram_input_bytes: c.dram_input_bytes * k,
            dram_psum_read_bytes: c.dram_psum_read_bytes * k,
            dram_write_bytes: c.dram_write_bytes * k,
            dram_transfers: c.dram_transfers * k,
            census: Census {
                construct_adds: c.census.construct_adds * k,
                queries: c.census.queries * k,
                merge_adds: c.census.merge_adds * k,
                reduce_adds: c.census.reduce_adds * k,
            },
            naive_ops: c.naive_ops * k,
            weight_pass_bytes: c.weight_pass_bytes * k,
        }
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Self) {
        self.construct_cycles += o.construct_cycles;
        self.query_cycles += o.query_cycles;
        self.drain_cycles += o.drain_cycles;
        self.stall_cycles += o.stall_cycles;
        self.total_cycles += o.total_cycles;
        self.tiles += o.tiles;
        self.rounds += o.rounds;
        self.interlock_cycles += o.interlock_cycles;
        self.adder_ops += o.adder_ops;
        self.adder_lane_ops += o.adder_lane_ops;
        self.construct_adder_ops += o.construct_adder_ops;
        self.construct_issue_slots += o.construct_issue_slots;
        self.ppe_busy_cycles += o.ppe_busy_cycles;
        self.lane_busy_cycles += o.lane_busy_cycles;
        self.lut_writes += o.lut_writes;
        self.lut_reads_construct += o.lut_reads_construct;
        self.lut_reads_query += o.lut_reads_query;
        self.lut_query_port_slots += o.lut_query_port_slots;
        self.lut_construct_port_slots += o.lut_construct_port_slots;
        self.path_reads += o.path_reads;
        self.weight_buffer_bytes += o.weight_buffer_bytes;
        self.input_buffer_bytes += o.input_buffer_bytes;
        self.output_buffer_bytes += o.output_buffer_bytes;
        self.path_buffer_bytes += o.path_buffer_bytes;
        self.dram_weight_bytes += o.dram_weight_bytes;
        self.dram_input_bytes += o.dram_input_bytes;
        self.dram_psum_read_bytes += o.dram_psum_read_bytes;
        self.dram_write_bytes += o.dram_write_bytes;
        self.dram_transfers += o.dram_transfers;
        self.census += o.census;
        self.naive_ops += o.naive_ops;
        self.weight_pass_bytes += o.weight_pass_bytes;
    }
}

/// Energy in picojoules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub adders: f64,
    pub lut: f64,
    pub buffers: f64,
    pub dram: f64,
    #[serde(rename = "static")]
    pub static_: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn from_counters(cfg: &HardwareConfig, c: &Counters) -> Self {
        let e = &cfg.energy;
        let row_bytes = (cfg.n_cols * cfg.lut_entry_bytes) as f64;
        let adders = c.adder_lane_ops as f64 * e.adder_pj_per_lane;
        let lut = (c.lut_reads_construct + c.lut_reads_query) as f64 * row_bytes * e.lut_read_pj_per_byte
            + c.lut_writes as f64 * row_bytes * e.lut_write_pj_per_byte;
        // DRAM fills write the buffers, write-backs read the output buffer
        let buffers = (c.weight_buffer_bytes + c.dram_weight_bytes) as f64 * e.weight_pj_per_byte
            + (c.input_buffer_bytes + c.dram_input_bytes) as f64 * e.input_pj_per_byte
            + (c.output_buffer_bytes + c.dram_psum_read_bytes + c.dram_write_bytes) as f64 * e.output_pj_per_byte
            + c.path_buffer_bytes as f64 * e.path_pj_per_byte;
        let dram = (c.dram_read_bytes() + c.dram_write_bytes) as f64 * 8.0 * cfg.dram.pj_per_bit
            + c.dram_transfers as f64 * cfg.dram.pj_per_transfer;
        let static_ = e.static_mw * c.total_cycles as f64 / cfg.freq_mhz * 1e3;
        EnergyBreakdown {
            adders,
            lut,
            buffers,
            dram,
            static_,
            total: adders + lut + buffers + dram + static_,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Utilization {
    /// LUT reads over available read-port slots during query phases.
    pub lut_ports_query: f64,
    /// LUT reads and writes over port slots during construct phases.
    pub lut_ports_construct: f64,
    /// Adder operations over the adders proportional to active PPEs, during rounds.
    pub adders: f64,
    /// Adder operations over every provisioned adder, during rounds.
    pub adders_provisioned: f64,
    /// Active PPE-cycles over L × total cycles, stalls included.
    pub ppes: f64,
    /// Active columns over n_cols, during rounds.
    pub lanes: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub latency_us: f64,
    /// Naive additions per second, in GOP/s.
    pub throughput_gops: f64,
    pub utilization: Utilization,
    /// DRAM weight bytes over one pass of the packed matrix.
    pub weight_reread_factor: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counters(cfg: &HardwareConfig, c: &Counters) -> Self {
        let a = cfg.total_adders() as u64;
        let l = cfg.l as u64;
        Metrics {
            latency_us: c.total_cycles as f64 / cfg.freq_mhz,
            throughput_gops: ratio(c.naive_ops, c.total_cycles) * cfg.freq_mhz / 1e3,
            utilization: Utilization {
                lut_ports_query: ratio(c.lut_reads_query, c.lut_query_port_slots),
                lut_ports_construct: ratio(c.lut_reads_construct + c.lut_writes, c.lut_construct_port_slots),
                adders: ratio(c.adder_ops * l, c.ppe_busy_cycles * a),
                adders_provisioned: ratio(c.adder_ops, c.round_cycles() * a),
                ppes: ratio(c.ppe_busy_cycles, c.total_cycles * l),
                lanes: ratio(c.lane_busy_cycles, c.ppe_busy_cycles * cfg.n_cols as u64),
            },
            weight_reread_factor: ratio(c.dram_weight_bytes, c.weight_pass_bytes),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub kernel: KernelShape,
    pub mode: ExecMode,
    pub schedule: TileSchedule,
    pub counters: Counters,
    pub energy: EnergyBreakdown,
    pub metrics: Metrics,
}

impl SimReport {
    /// One CSV row; see [`SimReport::CSV_HEADER`].
    pub fn csv_row(&self) -> Vec<String> {
        let c = &self.counters;
        let u = &self.metrics.utilization;
        vec![
            self.kernel.name.clone(),
            self.kernel.m.to_string(),
            self.kernel.k.to_string(),
            self.kernel.n.to_string(),
            self.mode.to_string(),
            c.construct_cycles.to_string(),
            c.query_cycles.to_string(),
            c.drain_cycles.to_string(),
            c.stall_cycles.to_string(),
            c.total_cycles.to_string(),
            c.dram_read_bytes().to_string(),
            c.dram_write_bytes.to_string(),
            format!("{:.3}", self.energy.total),
            format!("{:.3}", self.metrics.throughput_gops),
            format!("{:.6}", u.lut_ports_query),
            format!("{:.6}", u.adders),
            format!("{:.6}", u.ppes),
        ]
    }

    pub const CSV_HEADER: [&'static str; 17] = [
        "kernel",
        "m",
        "k",
        "n",
        "mode",
        "construct_cycles",
        "query_cycles",
        "drain_cycles",
        "stall_cycles",
        "total_cycles",
        "dram_read_bytes",
        "dram_write_bytes",
        "energy_pj",
        "throughput_gops",
        "lut_port_util_query",
        "adder_util",
        "ppe_util",
    ];
}

/// A configured accelerator running one build path. Round timings are memoised.
pub struct Simulator {
    cfg: HardwareConfig,
    mode: ExecMode,
    path: BuildPath,
    path_bytes: u64,
    rounds: HashMap<(u64, u64), RoundStats>,
}

impl Simulator {
    pub fn new(cfg: &HardwareConfig, mode: ExecMode) -> Result<Self, SimError> {
        cfg.validate()?;
        if mode.planes() == 0 {
            return Err(SimError::InvalidConfig("bit-serial mode needs at least one plane".into()));
        }
        let path = generate_path(&mode.chunk_config(cfg)?)?;
        let path_bytes = encode_path(&path).len() as u64;
        Ok(Simulator {
            cfg: cfg.clone(),
            mode,
            path,
            path_bytes,
            rounds: HashMap::new(),
        })
    }

    pub fn config(&self) -> &HardwareConfig {
        &self.cfg
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn path(&self) -> &BuildPath {
        &self.path
    }

    pub fn path_bytes(&self) -> u64 {
        self.path_bytes
    }

    pub fn round(&mut self, m_rows: u64, active: u64) -> RoundStats {
        let (cfg, path, planes) = (&self.cfg, &self.path, self.mode.planes());
        *self
            .rounds
            .entry((m_rows, active))
            .or_insert_with(|| simulate_round_with(cfg, path, m_rows, active, planes))
    }

    fn transfer_cycles(&self, bytes: u64) -> u64 {
        if bytes == 0 {
            0
        } else {
            self.cfg.dram.latency_cycles + (bytes as f64 / self.cfg.dram_bytes_per_cycle()).ceil() as u64
        }
    }

    /// Runs one kernel under `schedule`.
    pub fn run(&mut self, schedule: &TileSchedule, shape: &KernelShape) -> Result<SimReport, SimError> {
        if shape.m == 0 || shape.k == 0 || shape.n == 0 {
            return Err(SimError::InvalidConfig(format!("kernel {} has an empty dimension", shape.name)));
        }
        schedule.validate(&self.cfg, self.mode)?;
        schedule.check_fits(&self.cfg, self.mode, self.path_bytes)?;

        let chunk = self.mode.chunk(&self.cfg);
        let planes = self.mode.planes();
        let l = self.cfg.l as u64;
        let n_cols = self.cfg.n_cols as u64;
        let psum = self.cfg.psum_bytes as u64;
        let ports = self.cfg.lut_ports.reads_per_cycle() as u64;
        let steps = self.path.steps.len() as u64;
        let instr_bytes = 3u64;

        let (m_tile, k_tile, n_tile) = (schedule.m_tile, schedule.k_tile, schedule.n_tile);
        let counts = [
            shape.m.div_ceil(m_tile),
            shape.n.div_ceil(n_tile),
            shape.k.div_ceil(k_tile),
        ];
        let extent = |d: Dim| match d {
            Dim::M => counts[0],
            Dim::N => counts[1],
            Dim::K => counts[2],
        };
        let order = schedule.stationarity.order();
        let (outer, mid, inner) = (extent(order[0]), extent(order[1]), extent(order[2]));

        let mut c = Counters {
            naive_ops: shape.m * shape.k * shape.n,
            weight_pass_bytes: TileSchedule::weight_bytes(shape.m, shape.k, chunk, planes),
            ..Default::default()
        };
        let mut res_w: Option<(u64, u64)> = None;
        let mut res_x: Option<(u64, u64)> = None;
        let mut res_o: Option<(u64, u64)> = None;
        let mut started = vec![false; (counts[0] * counts[1]) as usize];
        let mut spilled = vec![false; (counts[0] * counts[1]) as usize];
        // previous tile: compute cycles and the write-back it overlaps with
        let mut prev: Option<(u64, u64)> = None;

        for a in 0..outer {
            for b in 0..mid {
                for d in 0..inner {
                    let mut idx = [0u64; 3];
                    for (dim, v) in order.iter().zip([a, b, d]) {
                        match dim {
                            Dim::M => idx[0] = v,
                            Dim::N => idx[1] = v,
                            Dim::K => idx[2] = v,
                        }
                    }
                    let [mi, ni, ki] = idx;
                    let m_len = m_tile.min(shape.m - mi * m_tile);
                    let n_len = n_tile.min(shape.n - ni * n_tile);
                    let k_len = k_tile.min(shape.k - ki * k_tile);
                    let o_idx = (mi * counts[1] + ni) as usize;

                    // DRAM traffic needed before this tile can start
                    let mut load = 0;
                    let mut writeback = 0;
                    if res_w != Some((mi, ki)) {
                        let bytes = TileSchedule::weight_bytes(m_len, k_len, chunk, planes);
                        c.dram_weight_bytes += bytes;
                        c.dram_transfers += 1;
                        load += self.transfer_cycles(bytes);
                        res_w = Some((mi, ki));
                    }
                    if res_x != Some((ki, ni)) {
                        let bytes = k_len * n_len;
                        c.dram_input_bytes += bytes;
                        c.dram_transfers += 1;
                        load += self.transfer_cycles(bytes);
                        res_x = Some((ki, ni));
                    }
                    if res_o != Some((mi, ni)) {
                        if let Some((pm, pn)) = res_o {
                            let bytes = m_tile.min(shape.m - pm * m_tile) * n_tile.min(shape.n - pn * n_tile) * psum;
                            c.dram_write_bytes += bytes;
                            c.dram_transfers += 1;
                            writeback = self.transfer_cycles(bytes);
                            spilled[(pm * counts[1] + pn) as usize] = true;
                        }
                        if spilled[o_idx] {
                            let bytes = m_len * n_len * psum;
                            c.dram_psum_read_bytes += bytes;
                            c.dram_transfers += 1;
                            load += self.transfer_cycles(bytes);
                        }
                        res_o = Some((mi, ni));
                    }
                    match prev {
                        None => c.stall_cycles += load,
                        Some((compute, wb)) => c.stall_cycles += (load + wb).saturating_sub(compute),
                    }

                    let compute = self.tile_compute(&mut c, m_len, k_len, n_len, started[o_idx], chunk, l, n_cols, psum, ports, steps, instr_bytes);
                    started[o_idx] = true;
                    c.tiles += 1;
                    prev = Some((compute, writeback));
                }
            }
        }
        if let Some((compute, wb)) = prev {
            c.stall_cycles += wb.saturating_sub(compute);
        }
        if let Some((pm, pn)) = res_o {
            let bytes = m_tile.min(shape.m - pm * m_tile) * n_tile.min(shape.n - pn * n_tile) * psum;
            c.dram_write_bytes += bytes;
            c.dram_transfers += 1;
            c.stall_cycles += self.transfer_cycles(bytes);
        }
        c.total_cycles = c.round_cycles() + c.stall_cycles;
        assert_eq!(
            c.total_cycles,
            c.construct_cycles + c.query_cycles + c.drain_cycles + c.stall_cycles,
            "unaccounted cycles"
        );

        Ok(SimReport {
            kernel: shape.clone(),
            mode: self.mode,
            schedule: *schedule,
            energy: EnergyBreakdown::from_counters(&self.cfg, &c),
            metrics: Metrics::from_counters(&self.cfg, &c),
            counters: c,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn tile_compute(
        &mut self,
        c: &mut Counters,
        m_len: u64,
        k_len: u64,
        n_len: u64,
        started: bool,
        chunk: u64,
        l: u64,
        n_cols: u64,
        psum: u64,
        ports: u64,
        steps: u64,
        instr_bytes: u64,
    ) -> u64 {
        let planes = self.mode.planes();
        let depth = self.cfg.pipeline_depth as u64;
        let chunks = k_len.div_ceil(chunk);
        let rounds = chunks.div_ceil(l);
        let mut cycles = 0;
        for g in 0..n_len.div_ceil(n_cols) {
            let cols = n_cols.min(n_len - g * n_cols);
            for r in 0..rounds {
                let active = l.min(chunks - r * l);
                let s = self.round(m_len, active);
                let t = s.total_cycles();
                cycles += t;
                c.rounds += 1;
                c.construct_cycles += s.construct_cycles;
                c.query_cycles += s.query_cycles;
                c.drain_cycles += s.drain_cycles;
                c.interlock_cycles += s.interlock_cycles;
                c.adder_ops += s.construct_ops + s.query_ops;
                c.adder_lane_ops += (s.construct_ops + s.query_ops) * cols;
                c.construct_adder_ops += s.construct_ops;
                c.construct_issue_slots += s.construct_cycles.saturating_sub(depth - 1 + s.interlock_cycles) * active;
                c.ppe_busy_cycles += t * active;
                c.lane_busy_cycles += t * active * cols;
                c.lut_writes += s.lut_writes;
                c.lut_reads_construct += s.lut_reads_construct;
                c.lut_reads_query += s.lut_reads_query;
                c.lut_query_port_slots += s.query_cycles * ports * active;
                c.lut_construct_port_slots += s.construct_cycles * ports * active;
                c.path_reads += s.path_reads;
                c.path_buffer_bytes += s.path_reads * instr_bytes;
                c.weight_buffer_bytes += m_len * planes * active;
                c.input_buffer_bytes += active * chunk * cols;

                let first = !started && r == 0;
                let outputs = m_len * cols;
                c.output_buffer_bytes += outputs * psum * if first { 1 } else { 2 };
                c.census.construct_adds += steps * active * cols;
                c.census.queries += outputs * planes * active;
                c.census.merge_adds += outputs * (planes - 1) * active;
                c.census.reduce_adds += outputs * (active - 1 + u64::from(!first));
            }
        }
        cycles
    }
}

/// Simulates one kernel from scratch.
pub fn simulate_kernel(
    cfg: &HardwareConfig,
    schedule: &TileSchedule,
    shape: &KernelShape,
    mode: ExecMode,
) -> Result<SimReport, SimError> {
    Simulator::new(cfg, mode)?.run(schedule, shape)
}
