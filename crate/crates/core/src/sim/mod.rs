//! Ground-truth worlds, the simulated depth camera and kinematic execution.

pub mod baseline;
mod worldgen;
pub mod world_file;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::local::Trajectory;
use crate::voxel::raycast::VoxelRay;
use crate::voxel::{RangeReturn, SensorFrame, Voxel, VoxelBox, VoxelMap, FACE_OFFSETS};

pub use worldgen::{generate_maze, generate_maze_with, generate_plant, upper_half_fraction, MazeParams};
pub use world_file::WorldFile;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("pose ({0:.3}, {1:.3}, {2:.3}) is inside an obstacle or outside the world")]
    PoseInObstacle(f64, f64, f64),
    #[error("world dimensions too small: need at least 4 voxels per axis, got {0:?}")]
    DegenerateDims([usize; 3]),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

/// Depth camera model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub max_range: f64,
    pub rays_per_degree: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec { fov_h_deg: 80.0, fov_v_deg: 60.0, max_range: 4.5, rays_per_degree: 2.0 }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_range > 0.0) {
            return Err("sensor max_range must be positive".into());
        }
        if !(self.rays_per_degree > 0.0) {
            return Err("sensor rays_per_degree must be positive".into());
        }
        if !(self.fov_h_deg > 0.0 && self.fov_h_deg < 180.0 && self.fov_v_deg > 0.0 && self.fov_v_deg < 180.0) {
            return Err("sensor field of view must lie in (0, 180) degrees".into());
        }
        Ok(())
    }

    pub fn ray_grid(&self) -> (usize, usize) {
        let nh = (self.fov_h_deg * self.rays_per_degree).round().max(1.0) as usize;
        let nv = (self.fov_v_deg * self.rays_per_degree).round().max(1.0) as usize;
        (nh, nv)
    }

    /// Unit ray directions for a sensor at `yaw`, row-major (elevation outer).
    pub fn directions(&self, yaw: f64) -> Vec<Vec3> {
        let (nh, nv) = self.ray_grid();
        let fh = self.fov_h_deg.to_radians();
        let fv = self.fov_v_deg.to_radians();
        let mut out = Vec::with_capacity(nh * nv);
        for iv in 0..nv {
            let el = -fv / 2.0 + (iv as f64 + 0.5) * fv / nv as f64;
            for ih in 0..nh {
                let az = yaw - fh / 2.0 + (ih as f64 + 0.5) * fh / nh as f64;
                out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

/// Closed voxel world with a spawn pose. Origin is the world-frame zero.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldModel {
    pub dims_m: [f64; 3],
    pub resolution: f64,
    dims: [usize; 3],
    occupied: Vec<bool>,
    pub spawn: Pose,
}

impl WorldModel {
    /// Empty world of the given size with its outer shell occupied.
    pub fn closed_box(dims_m: [f64; 3], resolution: f64, spawn: Pose) -> Result<Self, SimError> {
        if !(resolution > 0.0) {
            return Err(SimError::InvalidWorld(format!("resolution {resolution}")));
        }
        let dims = [
            (dims_m[0] / resolution).round() as usize,
            (dims_m[1] / resolution).round() as usize,
            (dims_m[2] / resolution).round() as usize,
        ];
        if dims.iter().any(|&d| d < 4) {
            return Err(SimError::DegenerateDims(dims));
        }
        let mut w = WorldModel { dims_m, resolution, dims, occupied: vec![false; dims[0] * dims[1] * dims[2]], spawn };
        w.close_shell();
        Ok(w)
    }

    fn close_shell(&mut self) {
        let [nx, ny, nz] = self.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
                        let i = x + nx * (y + ny * z);
                        self.occupied[i] = true;
                    }
                }
            }
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn in_bounds(&self, v: Voxel) -> bool {
        v.x >= 0
            && v.y >= 0
            && v.z >= 0
            && (v.x as usize) < self.dims[0]
            && (v.y as usize) < self.dims[1]
            && (v.z as usize) < self.dims[2]
    }

    pub fn index(&self, v: Voxel) -> Option<usize> {
        self.in_bounds(v).then(|| v.x as usize + self.dims[0] * (v.y as usize + self.dims[1] * v.z as usize))
    }

    pub fn voxel_of_index(&self, i: usize) -> Voxel {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        Voxel::new(x as i32, (r % self.dims[1]) as i32, (r / self.dims[1]) as i32)
    }

    pub fn voxel_at(&self, p: &Vec3) -> Voxel {
        let g = p / self.resolution;
        Voxel::new(g.x.floor() as i32, g.y.floor() as i32, g.z.floor() as i32)
    }

    pub fn center(&self, v: Voxel) -> Vec3 {
        Vec3::new(v.x as f64 + 0.5, v.y as f64 + 0.5, v.z as f64 + 0.5) * self.resolution
    }

    /// Out-of-bounds counts as occupied.
    pub fn is_occupied(&self, v: Voxel) -> bool {
        self.index(v).map_or(true, |i| self.occupied[i])
    }

    pub fn occupied_mask(&self) -> &[bool] {
        &self.occupied
    }

    pub fn set_occupied(&mut self, v: Voxel, occ: bool) {
        if let Some(i) = self.index(v) {
            self.occupied[i] = occ;
        }
    }

    /// Fills every voxel whose centre lies in `[min, max)` (metres).
    pub fn fill_box(&mut self, min: Vec3, max: Vec3, occ: bool) {
        let b = self.box_voxels(&min, &max);
        for v in b.iter() {
            self.set_occupied(v, occ);
        }
    }

    pub(crate) fn box_voxels(&self, min: &Vec3, max: &Vec3) -> VoxelBox {
        let lo = |x: f64, n: usize| ((x / self.resolution - 0.5 - 1e-9).ceil().max(0.0) as i32).min(n as i32);
        let full = VoxelBox::new(
            Voxel::new(0, 0, 0),
            Voxel::new(self.dims[0] as i32, self.dims[1] as i32, self.dims[2] as i32),
        );
        VoxelBox::new(
            Voxel::new(lo(min.x, self.dims[0]), lo(min.y, self.dims[1]), lo(min.z, self.dims[2])),
            Voxel::new(lo(max.x, self.dims[0]), lo(max.y, self.dims[1]), lo(max.z, self.dims[2])),
        )
        .intersection(&full)
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Distance from `v` to the nearest occupied voxel centre, searched up to `max_r` metres.
    pub fn clearance(&self, v: Voxel, max_r: f64) -> f64 {
        let r = (max_r / self.resolution).ceil() as i32;
        let mut best = max_r;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let u = v.offset([dx, dy, dz]);
                    if self.is_occupied(u) {
                        let d = ((dx * dx + dy * dy + dz * dz) as f64).sqrt() * self.resolution;
                        best = best.min(d);
                    }
                }
            }
        }
        best
    }

    /// Free voxels 6-connected to `start`.
    pub fn flood_fill_free(&self, start: Voxel) -> Vec<bool> {
        let mut seen = vec![false; self.occupied.len()];
        let Some(s) = self.index(start) else { return seen };
        if self.occupied[s] {
            return seen;
        }
        let mut q = VecDeque::new();
        seen[s] = true;
        q.push_back(start);
        while let Some(v) = q.pop_front() {
            for o in FACE_OFFSETS {
                let u = v.offset(o);
                if let Some(j) = self.index(u) {
                    if !self.occupied[j] && !seen[j] {
                        seen[j] = true;
                        q.push_back(u);
                    }
                }
            }
        }
        seen
    }

    /// Free space reachable from the spawn pose.
    pub fn reachable_from_spawn(&self) -> Vec<bool> {
        self.flood_fill_free(self.voxel_at(&self.spawn.position))
    }

    /// Turns every free voxel not connected to the spawn into an obstacle.
    pub(crate) fn seal_unreachable(&mut self) -> usize {
        let reach = self.reachable_from_spawn();
        let mut n = 0;
        for (i, occ) in self.occupied.iter_mut().enumerate() {
            if !*occ && !reach[i] {
                *occ = true;
                n += 1;
            }
        }
        n
    }

    /// Empty map with the same grid geometry.
    pub fn blank_map(&self, clearance_cap: f64) -> VoxelMap {
        VoxelMap::new(Vec3::zeros(), self.dims, self.resolution, clearance_cap).expect("world geometry is valid")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let s = self.voxel_at(&self.spawn.position);
        if self.is_occupied(s) {
            let p = self.spawn.position;
            return Err(SimError::PoseInObstacle(p.x, p.y, p.z));
        }
        Ok(())
    }
}

/// Renders one depth frame: one ray per grid cell of the field of view; depth
/// is the entry distance of the first occupied voxel, else `max_range`.
pub fn render_depth(world: &WorldModel, pose: &Pose, spec: &SensorSpec) -> Result<SensorFrame, SimError> {
    let p = pose.position;
    if world.is_occupied(world.voxel_at(&p)) {
        return Err(SimError::PoseInObstacle(p.x, p.y, p.z));
    }
    let origin = Vec3::zeros();
    let returns = spec
        .directions(pose.yaw)
        .into_iter()
        .map(|dir| {
            let mut depth = spec.max_range;
            for s in VoxelRay::on_grid(&origin, world.resolution, &p, &dir) {
                if s.t_entry >= spec.max_range {
                    break;
                }
                if world.is_occupied(s.voxel) {
                    depth = s.t_entry;
                    break;
                }
            }
            RangeReturn { direction: dir, depth }
        })
        .collect();
    Ok(SensorFrame {
        position: p,
        yaw: pose.yaw,
        returns,
        max_range: spec.max_range,
        fov_h_deg: spec.fov_h_deg,
        fov_v_deg: spec.fov_v_deg,
    })
}

/// Kinematic vehicle state and limits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavModel {
    pub position: Vec3,
    pub yaw: f64,
    pub speed: f64,
    pub v_max: f64,
    pub yaw_rate_max: f64,
}

impl UavModel {
    pub fn at(pose: Pose, v_max: f64, yaw_rate_max: f64) -> Self {
        UavModel { position: pose.position, yaw: pose.yaw, speed: 0.0, v_max, yaw_rate_max }
    }

    pub fn pose(&self) -> Pose {
        Pose { position: self.position, yaw: self.yaw }
    }
}

/// Samples the trajectory at `dt` intervals (perfect tracking), including the
/// final instant. The vehicle ends at the trajectory's last state.
pub fn execute_trajectory(uav: &mut UavModel, traj: &Trajectory, dt: f64) -> Vec<Pose> {
    let mut out = Vec::new();
    let n = (traj.duration() / dt).ceil() as usize;
    for k in 0..=n {
        let t = (k as f64 * dt).min(traj.duration());
        let s = traj.sample(t);
        uav.position = s.position;
        uav.yaw = s.yaw;
        uav.speed = s.speed;
        out.push(Pose { position: s.position, yaw: s.yaw });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{integrate_frame, VoxelState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn room() -> WorldModel {
        let spawn = Pose { position: Vec3::new(1.05, 2.05, 1.05), yaw: 0.0 };
        let mut w = WorldModel::closed_box([8.0, 4.0, 2.0], 0.1, spawn).unwrap();
        // one voxel thick wall covering x in [3.0, 3.1)
        w.fill_box(Vec3::new(3.05, 0.0, 0.0), Vec3::new(3.15, 4.0, 2.0), true);
        w
    }

    #[test]
    fn wall_two_metres_ahead() {
        let w = room();
        let f = render_depth(&w, &w.spawn, &SensorSpec::default()).unwrap();
        f.validate().unwrap();
        // central rays
        let (nh, nv) = SensorSpec::default().ray_grid();
        for iv in [nv / 2 - 1, nv / 2] {
            for ih in [nh / 2 - 1, nh / 2] {
                let r = f.returns[iv * nh + ih];
                assert!((r.depth - 2.0).abs() <= 0.1, "depth {}", r.depth);
            }
        }
    }

    #[test]
    fn open_space_reports_max_range() {
        let spawn = Pose { position: Vec3::new(1.0, 10.0, 10.0), yaw: 0.0 };
        let w = WorldModel::closed_box([20.0, 20.0, 20.0], 0.2, spawn).unwrap();
        let f = render_depth(&w, &w.spawn, &SensorSpec { rays_per_degree: 0.5, ..Default::default() }).unwrap();
        assert!(f.returns.iter().all(|r| r.depth == 4.5));
    }

    #[test]
    fn pose_in_obstacle_is_rejected() {
        let w = room();
        let bad = Pose { position: Vec3::new(3.04, 2.0, 1.0), yaw: 0.0 };
        assert!(matches!(render_depth(&w, &bad, &SensorSpec::default()), Err(SimError::PoseInObstacle(..))));
    }

    /// Exhaustive oracle: slab-test the ray against every occupied voxel and
    /// keep the one with the smallest entry distance.
    fn first_hit_exhaustive(w: &WorldModel, p: &Vec3, d: &Vec3, max: f64) -> Option<Voxel> {
        let mut best: Option<(f64, Voxel)> = None;
        for i in 0..w.len() {
            if !w.occupied_mask()[i] {
                continue;
            }
            let v = w.voxel_of_index(i);
            let lo = Vec3::new(v.x as f64, v.y as f64, v.z as f64) * w.resolution;
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in 0..3 {
                if d[a] == 0.0 {
                    if p[a] < lo[a] || p[a] >= lo[a] + w.resolution {
                        t0 = f64::INFINITY;
                    }
                    continue;
                }
                let ta = (lo[a] - p[a]) / d[a];
                let tb = (lo[a] + w.resolution - p[a]) / d[a];
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            if t0 < t1 && t1 > 0.0 && t0 < max && best.map_or(true, |(bt, _)| t0 < bt) {
                best = Some((t0, v));
            }
        }
        best.map(|(_, v)| v)
    }

    #[test]
    fn first_hit_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spawn = Pose { position: Vec3::new(2.0, 2.0, 1.0), yaw: 0.0 };
        let mut w = WorldModel::closed_box([4.0, 4.0, 2.0], 0.1, spawn).unwrap();
        for i in 0..w.len() {
            if rng.gen_bool(0.02) {
                let v = w.voxel_of_index(i);
                w.set_occupied(v, true);
            }
        }
        let mut checked = 0;
        while checked < 1000 {
            let p = Vec3::new(rng.gen_range(0.2..3.8), rng.gen_range(0.2..3.8), rng.gen_range(0.2..1.8));
            if w.is_occupied(w.voxel_at(&p)) {
                continue;
            }
            let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if d.norm() < 0.1 {
                continue;
            }
            let d = d.normalize();
            let mut fast = None;
            for s in VoxelRay::on_grid(&Vec3::zeros(), w.resolution, &p, &d) {
                if s.t_entry >= 4.5 {
                    break;
                }
                if w.is_occupied(s.voxel) {
                    fast = Some(s.voxel);
                    break;
                }
            }
            assert_eq!(fast, first_hit_exhaustive(&w, &p, &d, 4.5), "ray {checked}");
            checked += 1;
        }
    }

    #[test]
    fn rendered_frames_never_conflict_on_integration() {
        let w = room();
        let mut m = w.blank_map(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let pose = Pose {
                position: Vec3::new(rng.gen_range(0.3..2.9), rng.gen_range(0.3..3.7), rng.gen_range(0.3..1.7)),
                yaw: rng.gen_range(-3.0..3.0),
            };
            let f = render_depth(&w, &pose, &SensorSpec { rays_per_degree: 1.0, ..Default::default() }).unwrap();
            integrate_frame(&mut m, &f).unwrap();
            for i in 0..m.len() {
                let v = m.voxel_of_index(i);
                match m.state_at_index(i) {
                    VoxelState::Free => assert!(!w.is_occupied(v)),
                    VoxelState::Occupied => assert!(w.is_occupied(v)),
                    VoxelState::Unknown => {}
                }
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let w = room();
        let a = render_depth(&w, &w.spawn, &SensorSpec::default()).unwrap();
        let b = render_depth(&w, &w.spawn, &SensorSpec::default()).unwrap();
        assert_eq!(a, b);
    }
}
