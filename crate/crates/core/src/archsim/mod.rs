//! Cycle-level model of the LUT accelerator.
//!
//! L processing elements (PPEs) each hold one LUT. A round loads one activation chunk per
//! PPE, replays the build path through a pipelined adder (one step per cycle), then streams
//! weight bytes through two LUT ports while an adder tree sums the PPE outputs per row.
//! Kernels are tiled over (m, n, k) in a chosen loop order; DRAM traffic is modelled as
//! bandwidth-bound transfers overlapped with compute by double buffering.

mod catalog;
mod config;
mod dse;
mod kernel;
mod round;
mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pathgen::PathError;

pub use catalog::{Catalog, CatalogKernel, ModelDims, Stage};
pub use config::{BufferSizes, DramConfig, EnergyConfig, HardwareConfig, LutPorts};
pub use dse::{dse, DseGrid, DsePoint, DseResult, Scalarization, REFERENCE_POINT};
pub use kernel::{
    simulate_kernel, Counters, EnergyBreakdown, ExecMode, KernelShape, Metrics, SimReport, Simulator, Utilization,
};
pub use round::{simulate_round, simulate_round_with, RoundStats};
pub use schedule::{BufferKind, Stationarity, TileFootprint, TileSchedule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid hardware config: {0}")]
    InvalidConfig(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("infeasible schedule: {buffer} buffer needs {required} bytes, has {available}")]
    InfeasibleSchedule {
        buffer: BufferKind,
        required: u64,
        available: u64,
    },
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("empty design-space grid")]
    EmptyGrid,
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub multiplicity: u64,
    pub report: SimReport,
}

/// All BitLinear kernels of one transformer block, weighted by how often each runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub stage: Stage,
    pub mode: ExecMode,
    pub schedule: TileSchedule,
    pub kernels: Vec<KernelEntry>,
    pub counters: Counters,
    pub energy: EnergyBreakdown,
    pub metrics: Metrics,
}

pub fn simulate_model(
    cfg: &HardwareConfig,
    schedule: &TileSchedule,
    catalog: &Catalog,
    model: &str,
    stage: Stage,
    mode: ExecMode,
) -> Result<ModelReport, SimError> {
    let mut sim = Simulator::new(cfg, mode)?;
    let mut kernels = Vec::new();
    let mut total = Counters::default();
    for k in catalog.kernels(model, stage)? {
        let report = sim.run(schedule, &k.shape)?;
        total += report.counters.scaled(k.multiplicity);
        kernels.push(KernelEntry {
            multiplicity: k.multiplicity,
            report,
        });
    }
    Ok(ModelReport {
        model: catalog.model(model)?.name.clone(),
        stage,
        mode,
        schedule: *schedule,
        kernels,
        energy: EnergyBreakdown::from_counters(cfg, &total),
        metrics: Metrics::from_counters(cfg, &total),
        counters: total,
    })
}

/// Per-resource utilization of one kernel under the mode's default schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilizationReport {
    pub utilization: Utilization,
    /// Adder operations per PPE per construct cycle that issued a step.
    pub construct_adders_per_ppe: f64,
}

pub fn utilization_report(cfg: &HardwareConfig, shape: &KernelShape, mode: ExecMode) -> Result<UtilizationReport, SimError> {
    let report = simulate_kernel(cfg, &TileSchedule::default_for(cfg, mode), shape, mode)?;
    let c = &report.counters;
    Ok(UtilizationReport {
        utilization: report.metrics.utilization,
        construct_adders_per_ppe: if c.construct_issue_slots == 0 {
            0.0
        } else {
            c.construct_adder_ops as f64 / c.construct_issue_slots as f64
        },
    })
}

#[cfg(test)]
mod tests;
