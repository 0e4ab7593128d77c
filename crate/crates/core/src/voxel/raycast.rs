//! Integer voxel traversal along a ray (Amanatides–Woo).
//!
//! Exactly one axis advances per step, so consecutive voxels always share a
//! face. When several axis-plane crossings coincide the lowest axis index
//! (x, then y, then z) steps first.

use super::{Voxel, VoxelMap};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayStep {
    pub voxel: Voxel,
    /// Ray parameter (metres) where the ray enters the voxel.
    pub t_entry: f64,
    /// Ray parameter where it leaves.
    pub t_exit: f64,
}

/// Unbounded iterator of voxels pierced by a ray. Callers stop it.
#[derive(Clone, Debug)]
pub struct VoxelRay {
    voxel: Voxel,
    step: [i32; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t_entry: f64,
}

impl VoxelRay {
    /// `dir` must be a unit vector.
    pub fn new(map: &VoxelMap, start: &Vec3, dir: &Vec3) -> Self {
        Self::on_grid(&map.origin(), map.resolution(), start, dir)
    }

    /// Traversal over any grid with the given origin and voxel size. Grids
    /// sharing origin and resolution yield bit-identical `t` values.
    pub fn on_grid(o: &Vec3, res: f64, start: &Vec3, dir: &Vec3) -> Self {
        let g = (start - o) / res;
        let voxel = Voxel::new(g.x.floor() as i32, g.y.floor() as i32, g.z.floor() as i32);
        let mut step = [0; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let d = dir[a];
            let v = voxel.axis(a) as f64;
            if d > 0.0 {
                step[a] = 1;
                t_max[a] = ((v + 1.0) * res + o[a] - start[a]) / d;
                t_delta[a] = res / d;
            } else if d < 0.0 {
                step[a] = -1;
                t_max[a] = (v * res + o[a] - start[a]) / d;
                t_delta[a] = -res / d;
            }
        }
        VoxelRay { voxel, step, t_max, t_delta, t_entry: 0.0 }
    }
}

impl Iterator for VoxelRay {
    type Item = RayStep;

    fn next(&mut self) -> Option<RayStep> {
        let mut axis = 0;
        if self.t_max[1] < self.t_max[axis] {
            axis = 1;
        }
        if self.t_max[2] < self.t_max[axis] {
            axis = 2;
        }
        let t_exit = self.t_max[axis];
        let out = RayStep { voxel: self.voxel, t_entry: self.t_entry, t_exit };
        if !t_exit.is_finite() {
            // zero direction: report the start voxel forever
            return Some(out);
        }
        let nv = self.voxel.axis(axis) + self.step[axis];
        self.voxel.set_axis(axis, nv);
        self.t_entry = t_exit;
        self.t_max[axis] += self.t_delta[axis];
        Some(out)
    }
}

/// Voxels crossed by the straight segment `a -> b`, including both end voxels.
pub fn segment_voxels(map: &VoxelMap, a: &Vec3, b: &Vec3) -> Vec<Voxel> {
    let d = b - a;
    let len = d.norm();
    let end = map.voxel_at(b);
    if len <= 0.0 {
        return vec![end];
    }
    let dir = d / len;
    let mut out = Vec::new();
    for s in VoxelRay::new(map, a, &dir) {
        out.push(s.voxel);
        if s.voxel == end || s.t_exit >= len || out.len() > 1_000_000 {
            break;
        }
    }
    if *out.last().unwrap() != end {
        out.push(end);
    }
    out
}
