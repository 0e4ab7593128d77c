//! JSON world format: `{dims_m, resolution, boxes: [{min, max}], spawn}`.
//!
//! A voxel is occupied when its centre lies inside some box (`min` inclusive,
//! `max` exclusive). The outer shell is always closed on load.

use serde::{Deserialize, Serialize};

use super::{Pose, SimError, WorldModel};
use crate::geom::Vec3;
use crate::voxel::{Voxel, VoxelBox};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldFile {
    pub dims_m: [f64; 3],
    pub resolution: f64,
    pub boxes: Vec<BoxSpec>,
    pub spawn: SpawnSpec,
}

impl WorldFile {
    pub fn to_world(&self) -> Result<WorldModel, SimError> {
        let spawn = Pose { position: Vec3::from(self.spawn.position), yaw: self.spawn.yaw };
        let mut w = WorldModel::closed_box(self.dims_m, self.resolution, spawn)?;
        for b in &self.boxes {
            if (0..3).any(|a| b.min[a] > b.max[a]) {
                return Err(SimError::InvalidWorld(format!("box min {:?} exceeds max {:?}", b.min, b.max)));
            }
            w.fill_box(Vec3::from(b.min), Vec3::from(b.max), true);
        }
        w.validate()?;
        Ok(w)
    }

    /// Exact box decomposition of a world's obstacles.
    pub fn from_world(w: &WorldModel) -> Self {
        let dims = w.dims();
        let mut done = vec![false; w.len()];
        let occ = w.occupied_mask();
        let free_or_done = |done: &Vec<bool>, v: Voxel| match w.index(v) {
            Some(i) => !occ[i] || done[i],
            None => true,
        };
        let mut boxes = Vec::new();
        for i in 0..w.len() {
            if !occ[i] || done[i] {
                continue;
            }
            let lo = w.voxel_of_index(i);
            let mut hi = lo.offset([1, 1, 1]);
            while (hi.x as usize) < dims[0] && !free_or_done(&done, Voxel::new(hi.x, lo.y, lo.z)) {
                hi.x += 1;
            }
            'grow_y: while (hi.y as usize) < dims[1] {
                for x in lo.x..hi.x {
                    if free_or_done(&done, Voxel::new(x, hi.y, lo.z)) {
                        break 'grow_y;
                    }
                }
                hi.y += 1;
            }
            'grow_z: while (hi.z as usize) < dims[2] {
                for y in lo.y..hi.y {
                    for x in lo.x..hi.x {
                        if free_or_done(&done, Voxel::new(x, y, hi.z)) {
                            break 'grow_z;
                        }
                    }
                }
                hi.z += 1;
            }
            let b = VoxelBox::new(lo, hi);
            for v in b.iter() {
                done[w.index(v).unwrap()] = true;
            }
            let r = w.resolution;
            boxes.push(BoxSpec {
                min: [lo.x as f64 * r, lo.y as f64 * r, lo.z as f64 * r],
                max: [hi.x as f64 * r, hi.y as f64 * r, hi.z as f64 * r],
            });
        }
        let p = w.spawn.position;
        WorldFile {
            dims_m: w.dims_m,
            resolution: w.resolution,
            boxes,
            spawn: SpawnSpec { position: [p.x, p.y, p.z], yaw: w.spawn.yaw },
        }
    }
}
