//! Episode outputs: per-tick metrics, plan events and the summary report.

use serde::{Deserialize, Serialize};

use super::PlannerKind;
use crate::geom::Vec3;
use crate::global::{CostMatrix, Tour};
use crate::local::Trajectory;

pub const METRICS_HEADER: &str = "tick,time_s,coverage,distance_m,t_frontier_ms,t_global_ms,t_local_ms,t_traj_ms";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Done,
    TickBudgetExceeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: u64,
    pub time_s: f64,
    pub coverage: f64,
    pub distance_m: f64,
    pub t_frontier_ms: f64,
    pub t_global_ms: f64,
    pub t_local_ms: f64,
    pub t_traj_ms: f64,
}

pub fn metrics_csv(rows: &[TickMetrics]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.3},{:.6},{:.6},{:.3},{:.3},{:.3},{:.3}\n",
            r.tick, r.time_s, r.coverage, r.distance_m, r.t_frontier_ms, r.t_global_ms, r.t_local_ms, r.t_traj_ms
        ));
    }
    out
}

/// Average block times per invocation (ms).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockTimes {
    pub frontier_ms: f64,
    pub global_ms: f64,
    pub local_ms: f64,
    pub traj_ms: f64,
    pub total_ms: f64,
}

impl BlockTimes {
    pub fn with_total(mut self) -> Self {
        self.total_ms = self.frontier_ms + self.global_ms + self.local_ms + self.traj_ms;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub index: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub start_tick: u64,
    pub end_tick: Option<u64>,
    /// Known voxels whose state differed after the first update of this layer.
    pub reverted_voxels: usize,
    pub remaining_frontiers: Option<usize>,
    /// Remaining frontiers connected to the vehicle through free space.
    pub reachable_frontiers: Option<usize>,
    /// Remaining frontiers without a safe viewpoint or given up after visits.
    pub unexplorable_frontiers: Option<usize>,
}

impl LayerRecord {
    pub(crate) fn start(index: usize, z_lo: f64, z_hi: f64, tick: u64) -> Self {
        LayerRecord {
            index,
            z_lo,
            z_hi,
            start_tick: tick,
            end_tick: None,
            reverted_voxels: 0,
            remaining_frontiers: None,
            reachable_frontiers: None,
            unexplorable_frontiers: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanEvent {
    pub tick: u64,
    pub time_s: f64,
    pub layer: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub target: u64,
    /// Planned visiting order; just the target for the greedy planners.
    pub order: Vec<u64>,
    pub viewpoint: Vec3,
    /// Frontiers handed to the planner.
    pub live_frontiers: usize,
    pub compressed_dim: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalTiming {
    pub tick: u64,
    pub live: usize,
    pub compressed_dim: usize,
    pub compressed_ms: f64,
    pub full_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDump {
    pub tick: u64,
    pub matrix: CostMatrix,
    pub tour: Tour,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutedSegment {
    pub start_time: f64,
    /// Trajectory time actually flown before completion or replanning (s).
    pub executed: f64,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub metrics: Vec<TickMetrics>,
    pub events: Vec<PlanEvent>,
    pub segments: Vec<ExecutedSegment>,
    pub dumps: Vec<PlanDump>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub planner: PlannerKind,
    pub termination: Option<Termination>,
    pub ticks: u64,
    pub exploration_time_s: f64,
    pub distance_m: f64,
    pub final_coverage: f64,
    pub reachable_voxels: usize,
    pub known_reachable_voxels: usize,
    pub layers: Vec<LayerRecord>,
    pub plan_events: usize,
    pub planning_failures: usize,
    pub visit_failures: usize,
    pub final_live_frontiers: usize,
    pub final_reachable_frontiers: Option<usize>,
    pub final_unexplorable_frontiers: Option<usize>,
    pub max_live_frontiers: usize,
    pub max_compressed_dim: Option<usize>,
    /// Measured wall-clock averages; not deterministic.
    pub block_times: BlockTimes,
    pub global_timings: Vec<GlobalTiming>,
}
