//! Scenario-aware viewpoint selection and trajectory generation.

mod dag;
mod trajectory;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{yaw_distance, Vec3};
use crate::voxel::SensorFrame;

pub use dag::{build_viewpoint_dag, shortest_local_path, LocalEdge, LocalGraph, LocalNode, LocalPath};
pub use trajectory::{generate_trajectory, traversable, Trajectory, TrajectoryParams, TrajectorySample};

#[derive(Debug, Error, PartialEq)]
pub enum LocalError {
    #[error("sensor frame has no returns")]
    EmptyFrame,
    #[error("the first frontier has no viewpoints")]
    NoViewpoints,
    #[error("no path spans every layer of the viewpoint graph")]
    Disconnected,
    #[error("viewpoint is unreachable")]
    Unreachable,
}

/// Distances below this are clamped when computing steering rates (m).
pub const MIN_STEER_DISTANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewpointCandidate {
    pub position: Vec3,
    pub yaw: f64,
    pub n_view: usize,
    /// Path distance from the vehicle (m).
    pub cost_dist: f64,
    /// Absolute yaw change from the vehicle heading, in `[0, PI]`.
    pub cost_yaw: f64,
    /// `cost_yaw / cost_dist` (rad/m).
    pub steering_rate: f64,
}

impl ViewpointCandidate {
    pub fn new(position: Vec3, yaw: f64, n_view: usize) -> Self {
        ViewpointCandidate { position, yaw, n_view, cost_dist: 0.0, cost_yaw: 0.0, steering_rate: 0.0 }
    }

    /// Fills the vehicle-relative costs.
    pub fn with_costs(mut self, uav_yaw: f64, cost_dist: f64) -> Self {
        self.cost_dist = cost_dist;
        self.cost_yaw = yaw_distance(uav_yaw, self.yaw);
        self.steering_rate = self.cost_yaw / cost_dist.max(MIN_STEER_DISTANCE);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalParams {
    /// Frontiers closer than this along a path count as near targets (m).
    pub d_near_threshold: f64,
    pub corner_ratio_threshold: f64,
    pub window_capacity: usize,
    pub keep: usize,
    pub dag_depth: usize,
}

impl Default for LocalParams {
    fn default() -> Self {
        LocalParams { d_near_threshold: 3.0, corner_ratio_threshold: 0.5, window_capacity: 20, keep: 5, dag_depth: 3 }
    }
}

impl LocalParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_near_threshold >= 0.0) || !(0.0..=1.0).contains(&self.corner_ratio_threshold) {
            return Err("invalid local scenario thresholds".into());
        }
        if self.window_capacity == 0 || self.keep == 0 || self.dag_depth == 0 {
            return Err("window_capacity, keep and dag_depth must be positive".into());
        }
        Ok(())
    }
}

/// Fraction of returns that hit something before the range limit.
pub fn frame_obstacle_ratio(frame: &SensorFrame) -> Result<f64, LocalError> {
    if frame.returns.is_empty() {
        return Err(LocalError::EmptyFrame);
    }
    let hits = frame.returns.iter().filter(|r| frame.is_hit(r)).count();
    Ok(hits as f64 / frame.returns.len() as f64)
}

/// Sliding window of per-frame obstacle ratios.
#[derive(Clone, Debug, PartialEq)]
pub struct ObstacleWindow {
    queue: VecDeque<f64>,
    capacity: usize,
}

impl ObstacleWindow {
    pub fn new(capacity: usize) -> Self {
        ObstacleWindow { queue: VecDeque::with_capacity(capacity), capacity: capacity.max(1) }
    }

    /// Pushes a ratio, evicting the oldest at capacity, and returns the mean.
    pub fn update(&mut self, r: f64) -> f64 {
        if self.queue.len() == self.capacity {
            self.queue.pop_front();
        }
        self.queue.push_back(r.clamp(0.0, 1.0));
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.queue.is_empty() {
            return 0.0;
        }
        self.queue.iter().sum::<f64>() / self.queue.len() as f64
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.queue.iter()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    NearTarget,
    Corner,
    Default,
}

/// Near target takes precedence over corner.
pub fn classify_scenario(target_distance: f64, window_mean: f64, params: &LocalParams) -> Scenario {
    if target_distance < params.d_near_threshold {
        Scenario::NearTarget
    } else if window_mean > params.corner_ratio_threshold {
        Scenario::Corner
    } else {
        Scenario::Default
    }
}

/// Top `k` candidates: by steering rate near targets and in corners,
/// otherwise by visible cell count. Ties keep input order.
pub fn filter_viewpoints(cands: &[ViewpointCandidate], scenario: Scenario, k: usize) -> Vec<ViewpointCandidate> {
    let mut idx: Vec<usize> = (0..cands.len()).collect();
    match scenario {
        Scenario::NearTarget | Scenario::Corner => {
            idx.sort_by(|&a, &b| cands[b].steering_rate.total_cmp(&cands[a].steering_rate))
        }
        Scenario::Default => idx.sort_by(|&a, &b| cands[b].n_view.cmp(&cands[a].n_view)),
    }
    idx.into_iter().take(k).map(|i| cands[i].clone()).collect()
}
