//! Greedy comparison planners: nearest frontier, and nearest frontier inside
//! the current field of view.

use super::{Pose, SensorSpec};
use crate::frontier::{Frontier, PathMetric};
use crate::geom::view_angles;
use crate::local::ViewpointCandidate;

/// Target chosen by a greedy planner.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTarget {
    pub frontier: u64,
    pub viewpoint: ViewpointCandidate,
    pub distance: f64,
}

fn nearest_of<'a, M: PathMetric>(
    frontiers: impl Iterator<Item = &'a Frontier>,
    metric: &mut M,
) -> Option<GreedyTarget> {
    let mut best: Option<GreedyTarget> = None;
    for f in frontiers {
        let Some(vp) = f.viewpoints.first() else { continue };
        let d = metric.from_pose(f);
        if best.as_ref().map_or(true, |b| d < b.distance || (d == b.distance && f.id < b.frontier)) {
            best = Some(GreedyTarget { frontier: f.id, viewpoint: vp.clone(), distance: d });
        }
    }
    best
}

/// Frontier with the smallest path distance from the vehicle, visited from its
/// best-covering viewpoint.
pub fn baseline_nearest<M: PathMetric>(frontiers: &[&Frontier], metric: &mut M) -> Option<GreedyTarget> {
    nearest_of(frontiers.iter().copied(), metric)
}

/// Whether `f`'s average position lies inside the sensor cone at `pose`.
pub fn in_fov(pose: &Pose, f: &Frontier, sensor: &SensorSpec) -> bool {
    let (az, el) = view_angles(&pose.position, pose.yaw, &f.avg_position);
    az.abs() <= sensor.fov_h_deg.to_radians() / 2.0 && el.abs() <= sensor.fov_v_deg.to_radians() / 2.0
}

/// Nearest frontier inside the field of view, else the nearest overall.
pub fn baseline_fov<M: PathMetric>(
    pose: &Pose,
    frontiers: &[&Frontier],
    sensor: &SensorSpec,
    metric: &mut M,
) -> Option<GreedyTarget> {
    nearest_of(frontiers.iter().copied().filter(|f| in_fov(pose, f, sensor)), metric)
        .or_else(|| baseline_nearest(frontiers, metric))
}
