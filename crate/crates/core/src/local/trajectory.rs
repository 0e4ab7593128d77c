//! Kinematic trajectories: grid path, shortcut smoothing, trapezoidal speed
//! profile and linear yaw.

use serde::{Deserialize, Serialize};

use super::LocalError;
use crate::frontier::search::{astar, AstarQuery, SearchOutcome};
use crate::geom::{wrap_angle, Vec3};
use crate::sim::Pose;
use crate::voxel::raycast::segment_voxels;
use crate::voxel::{ClearanceMode, LayerView, Voxel, VoxelState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryParams {
    pub v_max: f64,
    pub yaw_rate_max: f64,
    /// Acceleration and deceleration used by the speed profile (m/s^2).
    pub accel: f64,
    pub safety_margin: f64,
    pub search_budget: usize,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams { v_max: 2.0, yaw_rate_max: 1.0, accel: 2.0, safety_margin: 0.3, search_budget: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec3,
    pub yaw: f64,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    points: Vec<Vec3>,
    /// Arc length at each point.
    cum: Vec<f64>,
    accel: f64,
    v_peak: f64,
    t_acc: f64,
    t_cruise: f64,
    t_trans: f64,
    yaw0: f64,
    yaw_delta: f64,
    duration: f64,
}

impl Trajectory {
    /// Follows the polyline from rest to rest, turning from `yaw0` to `yaw1`.
    pub fn from_polyline(points: Vec<Vec3>, yaw0: f64, yaw1: f64, p: &TrajectoryParams) -> Self {
        assert!(!points.is_empty());
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
        }
        let len = *cum.last().unwrap();
        let (v_peak, t_acc, t_cruise) = if len <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if len >= p.v_max * p.v_max / p.accel {
            (p.v_max, p.v_max / p.accel, (len - p.v_max * p.v_max / p.accel) / p.v_max)
        } else {
            let v = (p.accel * len).sqrt().min(p.v_max);
            (v, v / p.accel, 0.0)
        };
        let t_trans = 2.0 * t_acc + t_cruise;
        let yaw_delta = wrap_angle(yaw1 - yaw0);
        let t_yaw = yaw_delta.abs() / p.yaw_rate_max;
        Trajectory {
            points,
            cum,
            accel: p.accel,
            v_peak,
            t_acc,
            t_cruise,
            t_trans,
            yaw0,
            yaw_delta,
            duration: t_trans.max(t_yaw),
        }
    }

    pub fn stationary(pose: Pose) -> Self {
        Trajectory::from_polyline(vec![pose.position], pose.yaw, pose.yaw, &TrajectoryParams::default())
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.points
    }

    pub fn end_pose(&self) -> Pose {
        Pose { position: *self.points.last().unwrap(), yaw: wrap_angle(self.yaw0 + self.yaw_delta) }
    }

    fn arc(&self, t: f64) -> (f64, f64) {
        let len = self.length();
        if t >= self.t_trans {
            return (len, 0.0);
        }
        let a = self.accel;
        if t < self.t_acc {
            (0.5 * a * t * t, a * t)
        } else if t < self.t_acc + self.t_cruise {
            let s0 = 0.5 * a * self.t_acc * self.t_acc;
            (s0 + self.v_peak * (t - self.t_acc), self.v_peak)
        } else {
            let r = self.t_trans - t;
            ((len - 0.5 * a * r * r).max(0.0), a * r)
        }
    }

    fn point_at(&self, s: f64) -> Vec3 {
        let k = self.cum.partition_point(|&c| c <= s);
        if k >= self.points.len() {
            return *self.points.last().unwrap();
        }
        let k = k.max(1);
        let seg = self.cum[k] - self.cum[k - 1];
        let u = if seg > 0.0 { (s - self.cum[k - 1]) / seg } else { 1.0 };
        self.points[k - 1] + (self.points[k] - self.points[k - 1]) * u.clamp(0.0, 1.0)
    }

    pub fn sample(&self, t: f64) -> TrajectorySample {
        let t = t.clamp(0.0, self.duration);
        let (s, speed) = self.arc(t);
        let frac = if self.duration > 0.0 { t / self.duration } else { 1.0 };
        TrajectorySample { t, position: self.point_at(s), yaw: wrap_angle(self.yaw0 + self.yaw_delta * frac), speed }
    }

    /// Rows `t,x,y,z,yaw,speed` sampled every `dt` seconds, header included.
    pub fn to_csv(&self, dt: f64) -> String {
        let mut out = String::from("t,x,y,z,yaw,speed\n");
        let n = (self.duration / dt).ceil() as usize;
        for k in 0..=n {
            let s = self.sample((k as f64 * dt).min(self.duration));
            out.push_str(&format!(
                "{:.4},{:.4},{:.4},{:.4},{:.5},{:.4}\n",
                s.t, s.position.x, s.position.y, s.position.z, s.yaw, s.speed
            ));
        }
        out
    }
}

/// Voxels a trajectory may pass through: free and clear of unknown or
/// occupied space by the safety margin.
pub fn traversable(view: &LayerView, v: Voxel, margin: f64) -> bool {
    view.state(v) == Some(VoxelState::Free) && view.map().is_safe(v, margin, ClearanceMode::Pessimistic)
}

/// Plans from `start` to the viewpoint pose over safe voxels of `view`.
pub fn generate_trajectory(
    start: &Pose,
    goal: &Pose,
    view: &LayerView,
    p: &TrajectoryParams,
) -> Result<Trajectory, LocalError> {
    let map = view.map();
    let s = map.voxel_at(&start.position);
    let g = map.voxel_at(&goal.position);
    if !view.contains(s) || !traversable(view, g, p.safety_margin) {
        return Err(LocalError::Unreachable);
    }
    let pass = |v: Voxel| traversable(view, v, p.safety_margin);
    let q = AstarQuery { bound: f64::INFINITY, max_expansions: p.search_budget, no_corner_cutting: true };
    let (out, path) = astar(view, s, g, pass, &q, true);
    let path = match (out, path) {
        (SearchOutcome::Found(_), Some(path)) => path,
        _ => return Err(LocalError::Unreachable),
    };
    let mut pts = vec![start.position];
    for v in &path {
        let c = map.center(*v);
        if (c - *pts.last().unwrap()).norm() > 1e-12 {
            pts.push(c);
        }
    }
    if (goal.position - *pts.last().unwrap()).norm() > 1e-12 {
        pts.push(goal.position);
    }
    let pts = shortcut(view, &pts, s, p.safety_margin);
    Ok(Trajectory::from_polyline(pts, start.yaw, goal.yaw, p))
}

fn segment_clear(view: &LayerView, a: &Vec3, b: &Vec3, start: Voxel, margin: f64) -> bool {
    segment_voxels(view.map(), a, b).into_iter().all(|v| v == start || traversable(view, v, margin))
}

/// Greedy forward shortcutting: from each kept point, jump to the furthest
/// following point whose straight segment stays on safe voxels.
fn shortcut(view: &LayerView, pts: &[Vec3], start: Voxel, margin: f64) -> Vec<Vec3> {
    let mut out = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = i + 1;
        while j + 1 < pts.len() && segment_clear(view, &pts[i], &pts[j + 1], start, margin) {
            j += 1;
        }
        out.push(pts[j]);
        i = j;
    }
    out
}
