use serde::{Deserialize, Serialize};

use super::HardwareConfig;
use crate::pathgen::BuildPath;

/// Cycle counts and resource events of one computation round: all active PPEs build their
/// LUT from one activation chunk each, then answer `m_rows` queries per weight plane while
/// the aggregator sums the PPE results row by row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub construct_cycles: u64,
    pub query_cycles: u64,
    pub drain_cycles: u64,
    /// Cycles in the construct phase where the next step waited on an unfinished write.
    pub interlock_cycles: u64,
    pub active_ppes: u64,
    /// Adder operations (one per active PPE per path step, one per query).
    pub construct_ops: u64,
    pub query_ops: u64,
    pub lut_writes: u64,
    pub lut_reads_construct: u64,
    pub lut_reads_query: u64,
    /// Instruction fetches, including the terminating `Finish`.
    pub path_reads: u64,
    /// Queries issued in each query cycle by every active PPE.
    pub max_queries_per_cycle: u64,
}

impl RoundStats {
    pub fn total_cycles(&self) -> u64 {
        self.construct_cycles + self.query_cycles + self.drain_cycles
    }
}

/// Steps through the construction pipeline with a write scoreboard: a step issues one cycle
/// after its predecessor unless its source entry is still in flight. Returns the phase length
/// and the number of interlock stalls.
fn construct_timing(path: &BuildPath, depth: u64) -> (u64, u64) {
    let mut ready = vec![0u64; path.config.stored_entries()];
    let mut next_issue = 0u64;
    let mut last_issue = None;
    let mut stalls = 0;
    for step in &path.steps {
        let t = next_issue.max(ready[step.src as usize]);
        stalls += t - next_issue;
        ready[step.dst as usize] = t + depth;
        last_issue = Some(t);
        next_issue = t + 1;
    }
    match last_issue {
        Some(t) => (t + depth, stalls),
        None => (0, 0),
    }
}

/// Simulates one round with `active_ppes` of the L PPEs holding a chunk and `planes` weight
/// planes queried per row.
pub fn simulate_round_with(
    cfg: &HardwareConfig,
    path: &BuildPath,
    m_rows: u64,
    active_ppes: u64,
    planes: u64,
) -> RoundStats {
    assert!(active_ppes >= 1 && active_ppes <= cfg.l as u64, "active PPEs out of range");
    assert!(planes >= 1);
    let steps = path.steps.len() as u64;
    let (construct_cycles, interlock_cycles) = construct_timing(path, cfg.pipeline_depth as u64);

    // each issued query occupies one adder while its row is summed and accumulated
    let per_cycle = (cfg.lut_ports.reads_per_cycle() as u64).min(cfg.total_adders() as u64 / active_ppes);
    let mut remaining = m_rows * planes;
    let mut query_cycles = 0;
    let mut query_ops = 0;
    while remaining > 0 {
        let issued = per_cycle.min(remaining);
        remaining -= issued;
        query_ops += issued * active_ppes;
        query_cycles += 1;
    }

    RoundStats {
        construct_cycles,
        query_cycles,
        drain_cycles: if m_rows > 0 { cfg.drain_cycles() } else { 0 },
        interlock_cycles,
        active_ppes,
        construct_ops: steps * active_ppes,
        query_ops,
        lut_writes: steps * active_ppes,
        lut_reads_construct: steps * active_ppes,
        lut_reads_query: m_rows * planes * active_ppes,
        path_reads: steps + 1,
        max_queries_per_cycle: per_cycle,
    }
}

/// A full round of all L PPEs in ternary mode.
pub fn simulate_round(cfg: &HardwareConfig, path: &BuildPath, m_rows: u64) -> RoundStats {
    simulate_round_with(cfg, path, m_rows, cfg.l as u64, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathgen::{generate_path, ChunkConfig, LutMode};

    fn ternary() -> BuildPath {
        generate_path(&ChunkConfig::ternary_default()).unwrap()
    }

    #[test]
    fn default_round_1080_rows() {
        let cfg = HardwareConfig::default();
        let r = simulate_round(&cfg, &ternary(), 1080);
        assert_eq!(r.construct_cycles, 124);
        assert_eq!(r.query_cycles, 540);
        assert_eq!(r.drain_cycles, 7);
        assert_eq!(r.interlock_cycles, 0);
        assert_eq!(r.total_cycles(), 671);
        assert_eq!(r.construct_ops, 121 * 52);
        assert_eq!(r.query_ops, 1080 * 52);
    }

    #[test]
    fn single_row() {
        let cfg = HardwareConfig::default();
        let r = simulate_round(&cfg, &ternary(), 1);
        assert_eq!(r.query_cycles, 1);
        assert_eq!(r.total_cycles(), 124 + 1 + 7);
    }

    #[test]
    fn binary_c7_construct() {
        let cfg = HardwareConfig::default();
        let path = generate_path(&ChunkConfig::binary_default()).unwrap();
        let r = simulate_round_with(&cfg, &path, 1080, 52, 2);
        assert_eq!(r.construct_cycles, 127 + 3);
        assert_eq!(r.query_cycles, 1080);
    }

    #[test]
    fn shallow_path_on_deep_pipeline_interlocks() {
        // a depth-1 schedule replayed on a 4-stage pipeline must stall on back-to-back reuse
        let cfg = HardwareConfig::default();
        let path = generate_path(&ChunkConfig::new(LutMode::Ternary, 2, 1).unwrap()).unwrap();
        assert!(path.min_raw_distance().unwrap() < 4);
        let r = simulate_round(&cfg, &path, 10);
        assert!(r.interlock_cycles > 0);
        assert_eq!(r.construct_cycles, 4 + 3 + r.interlock_cycles);
    }

    #[test]
    fn fewer_adders_halve_query_rate() {
        let cfg = HardwareConfig {
            extra_adders: 0,
            ..Default::default()
        };
        let r = simulate_round(&cfg, &ternary(), 1080);
        assert_eq!(r.query_cycles, 1080);
        // a partially filled round frees adders, but the two LUT ports still cap the rate
        let cfg = HardwareConfig::default();
        let r = simulate_round_with(&cfg, &ternary(), 1080, 10, 1);
        assert_eq!(r.query_cycles, 540);
    }
}
