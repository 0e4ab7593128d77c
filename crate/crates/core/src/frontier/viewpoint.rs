//! Candidate sensing poses around a frontier.

use serde::{Deserialize, Serialize};

use super::Frontier;
use crate::geom::{bearing, view_angles, Vec3};
use crate::local::ViewpointCandidate;
use crate::sim::SensorSpec;
use crate::voxel::raycast::VoxelRay;
use crate::voxel::{ClearanceMode, LayerView, Voxel, VoxelMap, VoxelState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViewpointParams {
    pub radii: Vec<f64>,
    pub angle_step_deg: f64,
    pub safety_margin: f64,
}

impl Default for ViewpointParams {
    fn default() -> Self {
        ViewpointParams { radii: vec![1.0, 1.5, 2.0], angle_step_deg: 20.0, safety_margin: 0.3 }
    }
}

/// Visibility test used for coverage counts: within range (one voxel short
/// of the sensor limit), inside a slightly shrunk field of view, and with no
/// occupied voxel on the ray before the cell. Unknown voxels do not occlude.
pub fn cell_visible(map: &VoxelMap, eye: &Vec3, yaw: f64, cell: Voxel, sensor: &SensorSpec) -> bool {
    let c = map.center(cell);
    let d = c - eye;
    let dist = d.norm();
    if dist > sensor.max_range - map.resolution() || dist <= 0.0 {
        return false;
    }
    let (az, el) = view_angles(eye, yaw, &c);
    if az.abs() > 0.45 * sensor.fov_h_deg.to_radians() || el.abs() > 0.45 * sensor.fov_v_deg.to_radians() {
        return false;
    }
    let dir = d / dist;
    for s in VoxelRay::new(map, eye, &dir) {
        if s.voxel == cell || s.t_entry >= dist {
            return true;
        }
        if matches!(map.state(s.voxel), None | Some(VoxelState::Occupied)) {
            return false;
        }
    }
    true
}

/// Samples poses on horizontal circles around the frontier centroid, at the
/// centroid height clamped into the view. A pose is kept when its voxel lies
/// in the view, is free and keeps the safety margin (unknown space counted
/// as obstacle), and sees at least one cell. When that height yields nothing
/// (floor and ceiling patches right below or above explored space), other
/// heights of the view are tried, nearest first, in steps of half a metre.
/// Sorted by visible cell count, descending, stable in sampling order.
pub fn sample_viewpoints(
    f: &Frontier,
    view: &LayerView,
    sensor: &SensorSpec,
    params: &ViewpointParams,
) -> Vec<ViewpointCandidate> {
    let map = view.map();
    let (z_lo, z_hi) = view.z_range();
    let top = map.upper_corner().z.min(z_hi);
    let bottom = map.origin().z.max(z_lo);
    let m = params.safety_margin;
    if top - bottom <= 2.0 * m {
        return sample_at(f, view, sensor, params, (bottom + top) / 2.0);
    }
    let (lo, hi) = (bottom + m, top - m);
    let z0 = f.avg_position.z.clamp(lo, hi);
    let out = sample_at(f, view, sensor, params, z0);
    if !out.is_empty() {
        return out;
    }
    let steps = ((hi - lo) / 0.5).floor() as i32;
    let mut heights: Vec<f64> = (0..=steps).map(|k| lo + 0.5 * k as f64).chain([hi]).collect();
    heights.sort_by(|a, b| (a - z0).abs().total_cmp(&(b - z0).abs()).then(a.total_cmp(b)));
    for z in heights.into_iter().filter(|z| (z - z0).abs() >= 0.25) {
        let out = sample_at(f, view, sensor, params, z);
        if !out.is_empty() {
            return out;
        }
    }
    Vec::new()
}

fn sample_at(
    f: &Frontier,
    view: &LayerView,
    sensor: &SensorSpec,
    params: &ViewpointParams,
    z: f64,
) -> Vec<ViewpointCandidate> {
    let map = view.map();
    let m = params.safety_margin;
    let steps = (360.0 / params.angle_step_deg).round().max(1.0) as usize;
    let mut out = Vec::new();
    let mut seen: Vec<Voxel> = Vec::new();
    for &r in &params.radii {
        for k in 0..steps {
            let th = (k as f64 * params.angle_step_deg).to_radians();
            let p = Vec3::new(f.avg_position.x + r * th.cos(), f.avg_position.y + r * th.sin(), z);
            let v = map.voxel_at(&p);
            if !view.contains(v) || seen.contains(&v) {
                continue;
            }
            seen.push(v);
            if view.state(v) != Some(VoxelState::Free) || !map.is_safe(v, m, ClearanceMode::Pessimistic) {
                continue;
            }
            let pos = map.center(v);
            let yaw = bearing(&pos, &f.avg_position);
            let n_view = f.cells.iter().filter(|c| cell_visible(map, &pos, yaw, **c, sensor)).count();
            if n_view == 0 {
                continue;
            }
            out.push(ViewpointCandidate::new(pos, yaw, n_view));
        }
    }
    out.sort_by(|a, b| b.n_view.cmp(&a.n_view));
    out
}
