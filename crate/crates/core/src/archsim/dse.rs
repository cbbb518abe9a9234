use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::CatalogKernel;
use super::kernel::{EnergyBreakdown, ExecMode, Simulator};
use super::schedule::{Stationarity, TileSchedule};
use super::{HardwareConfig, SimError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DseGrid {
    pub m_tiles: Vec<u64>,
    pub k_tiles: Vec<u64>,
    pub n_tiles: Vec<u64>,
    pub stationarities: Vec<Stationarity>,
}

impl Default for DseGrid {
    fn default() -> Self {
        DseGrid {
            m_tiles: vec![270, 540, 1080, 2160],
            k_tiles: vec![260, 520, 1040],
            n_tiles: vec![8, 16, 32, 64],
            stationarities: Stationarity::ALL.to_vec(),
        }
    }
}

impl DseGrid {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidSchedule(format!("bad grid: {e}")))
    }

    pub fn schedules(&self) -> Vec<TileSchedule> {
        let mut out = Vec::new();
        for &m_tile in &self.m_tiles {
            for &k_tile in &self.k_tiles {
                for &n_tile in &self.n_tiles {
                    for &stationarity in &self.stationarities {
                        out.push(TileSchedule {
                            m_tile,
                            k_tile,
                            n_tile,
                            stationarity,
                        });
                    }
                }
            }
        }
        out
    }
}

/// score = latency_weight · latency / best latency + energy_weight · energy / best energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scalarization {
    pub latency_weight: f64,
    pub energy_weight: f64,
}

impl Default for Scalarization {
    fn default() -> Self {
        Scalarization {
            latency_weight: 0.5,
            energy_weight: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsePoint {
    pub schedule: TileSchedule,
    pub feasible: bool,
    pub reason: Option<String>,
    pub latency_cycles: Option<u64>,
    pub energy_pj: Option<f64>,
    /// On-chip bytes one tile occupies across weight, input, output and path buffers.
    pub buffer_bytes: u64,
    pub pareto: bool,
    pub score: Option<f64>,
    /// 1-based position by score among feasible points.
    pub rank: Option<usize>,
    /// The reference design point (1080, 520, 32, mnk).
    pub reference: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub mode: ExecMode,
    pub scalarization: Scalarization,
    /// In grid order.
    pub points: Vec<DsePoint>,
}

pub const REFERENCE_POINT: TileSchedule = TileSchedule {
    m_tile: 1080,
    k_tile: 520,
    n_tile: 32,
    stationarity: Stationarity::Mnk,
};

impl DseResult {
    pub fn pareto_front(&self) -> Vec<&DsePoint> {
        self.points.iter().filter(|p| p.pareto).collect()
    }

    pub fn ranked(&self) -> Vec<&DsePoint> {
        let mut v: Vec<&DsePoint> = self.points.iter().filter(|p| p.rank.is_some()).collect();
        v.sort_by_key(|p| p.rank);
        v
    }

    pub fn find(&self, s: &TileSchedule) -> Option<&DsePoint> {
        self.points.iter().find(|p| p.schedule == *s)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "m_tile",
            "k_tile",
            "n_tile",
            "stationarity",
            "feasible",
            "reason",
            "latency_cycles",
            "energy_pj",
            "buffer_bytes",
            "pareto",
            "score",
            "rank",
            "reference",
        ])
        .unwrap();
        for p in &self.points {
            let s = &p.schedule;
            w.write_record([
                s.m_tile.to_string(),
                s.k_tile.to_string(),
                s.n_tile.to_string(),
                s.stationarity.to_string(),
                p.feasible.to_string(),
                p.reason.clone().unwrap_or_default(),
                p.latency_cycles.map(|v| v.to_string()).unwrap_or_default(),
                p.energy_pj.map(|v| format!("{v:.3}")).unwrap_or_default(),
                p.buffer_bytes.to_string(),
                p.pareto.to_string(),
                p.score.map(|v| format!("{v:.6}")).unwrap_or_default(),
                p.rank.map(|v| v.to_string()).unwrap_or_default(),
                p.reference.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn evaluate(
    cfg: &HardwareConfig,
    mode: ExecMode,
    shapes: &[CatalogKernel],
    schedule: TileSchedule,
) -> Result<DsePoint, SimError> {
    let mut sim = Simulator::new(cfg, mode)?;
    let footprint = schedule.footprint(cfg, mode, sim.path_bytes()).total();
    let mut point = DsePoint {
        schedule,
        feasible: false,
        reason: None,
        latency_cycles: None,
        energy_pj: None,
        buffer_bytes: footprint,
        pareto: false,
        score: None,
        rank: None,
        reference: schedule == REFERENCE_POINT,
    };
    let mut cycles = 0;
    let mut counters = super::Counters::default();
    for k in shapes {
        match sim.run(&schedule, &k.shape) {
            Ok(r) => {
                cycles += r.counters.total_cycles * k.multiplicity;
                counters += r.counters.scaled(k.multiplicity);
            }
            Err(e @ (SimError::InfeasibleSchedule { .. } | SimError::InvalidSchedule(_))) => {
                point.reason = Some(e.to_string());
                return Ok(point);
            }
            Err(e) => return Err(e),
        }
    }
    point.feasible = true;
    point.latency_cycles = Some(cycles);
    point.energy_pj = Some(EnergyBreakdown::from_counters(cfg, &counters).total);
    Ok(point)
}

/// Simulates every grid point over `shapes` (weighted by multiplicity), marks the
/// latency–energy Pareto front and ranks feasible points by `scalarization`.
pub fn dse(
    cfg: &HardwareConfig,
    shapes: &[CatalogKernel],
    grid: &DseGrid,
    mode: ExecMode,
    scalarization: Scalarization,
) -> Result<DseResult, SimError> {
    let schedules = grid.schedules();
    if schedules.is_empty() || shapes.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    let mut points = schedules
        .into_par_iter()
        .map(|s| evaluate(cfg, mode, shapes, s))
        .collect::<Result<Vec<_>, _>>()?;

    let feasible: Vec<(u64, f64)> = points
        .iter()
        .filter_map(|p| Some((p.latency_cycles?, p.energy_pj?)))
        .collect();
    let best_lat = feasible.iter().map(|f| f.0).min();
    let best_energy = feasible.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    for p in points.iter_mut() {
        let (Some(lat), Some(energy)) = (p.latency_cycles, p.energy_pj) else { continue };
        p.pareto = !feasible
            .iter()
            .any(|&(l, e)| l <= lat && e <= energy && (l < lat || e < energy));
        p.score = Some(
            scalarization.latency_weight * lat as f64 / best_lat.unwrap() as f64
                + scalarization.energy_weight * energy / best_energy,
        );
    }
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| points[i].score.is_some()).collect();
    order.sort_by(|&a, &b| points[a].score.unwrap().total_cmp(&points[b].score.unwrap()).then(a.cmp(&b)));
    for (rank, i) in order.into_iter().enumerate() {
        points[i].rank = Some(rank + 1);
    }
    Ok(DseResult {
        mode,
        scalarization,
        points,
    })
}
