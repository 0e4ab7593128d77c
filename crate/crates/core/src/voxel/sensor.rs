//! Depth frames and their integration into the occupancy map.

use serde::{Deserialize, Serialize};

use super::raycast::VoxelRay;
use super::{MapError, UpdateRegion, VoxelBox, VoxelMap, VoxelState};
use crate::geom::{view_angles, Vec3};

/// One range return: unit direction in the world frame and measured depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeReturn {
    pub direction: Vec3,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub position: Vec3,
    pub yaw: f64,
    pub returns: Vec<RangeReturn>,
    pub max_range: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
}

impl SensorFrame {
    pub fn is_hit(&self, r: &RangeReturn) -> bool {
        r.depth < self.max_range
    }

    /// Checks the frame invariants: every direction inside the FOV and
    /// `0 < depth <= max_range`.
    pub fn validate(&self) -> Result<(), String> {
        let half_h = self.fov_h_deg.to_radians() / 2.0 + 1e-9;
        let half_v = self.fov_v_deg.to_radians() / 2.0 + 1e-9;
        for (i, r) in self.returns.iter().enumerate() {
            let (az, el) = view_angles(&Vec3::zeros(), self.yaw, &r.direction);
            if az.abs() > half_h || el.abs() > half_v {
                return Err(format!("return {i} outside the field of view"));
            }
            if !(r.depth > 0.0 && r.depth <= self.max_range) {
                return Err(format!("return {i} has depth {}", r.depth));
            }
        }
        Ok(())
    }
}

/// Integrates a frame. Voxels a ray passes through become free, the voxel
/// holding a hit becomes occupied. Within one frame occupied wins over free.
pub fn integrate_frame(map: &mut VoxelMap, frame: &SensorFrame) -> Result<UpdateRegion, MapError> {
    integrate_frame_with(map, frame, |_, _, _| {})
}

/// Like [`integrate_frame`], reporting each state transition
/// `(voxel index, old, new)` to `on_change`.
pub fn integrate_frame_with<F>(
    map: &mut VoxelMap,
    frame: &SensorFrame,
    mut on_change: F,
) -> Result<UpdateRegion, MapError>
where
    F: FnMut(usize, VoxelState, VoxelState),
{
    let p = frame.position;
    if !map.contains_point(&p) {
        return Err(MapError::PoseOutOfBounds(p.x, p.y, p.z));
    }
    let mut changed = VoxelBox::empty();
    let mut endpoints = Vec::new();
    for r in &frame.returns {
        let hit = frame.is_hit(r);
        for s in VoxelRay::new(map, &p, &r.direction) {
            let Some(i) = map.index(s.voxel) else { break };
            if hit {
                if s.t_exit <= r.depth {
                    if let Some(old) = map.promote(i, VoxelState::Free) {
                        changed.include(s.voxel);
                        on_change(i, old, VoxelState::Free);
                    }
                } else {
                    endpoints.push(i);
                    break;
                }
            } else {
                if s.t_entry >= r.depth {
                    break;
                }
                if let Some(old) = map.promote(i, VoxelState::Free) {
                    changed.include(s.voxel);
                    on_change(i, old, VoxelState::Free);
                }
            }
        }
    }
    for i in endpoints {
        if let Some(old) = map.promote(i, VoxelState::Occupied) {
            let v = map.voxel_of_index(i);
            changed.include(v);
            on_change(i, old, VoxelState::Occupied);
        }
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::Voxel;

    fn frame(pos: Vec3, dirs: &[(Vec3, f64)]) -> SensorFrame {
        SensorFrame {
            position: pos,
            yaw: 0.0,
            returns: dirs.iter().map(|(d, depth)| RangeReturn { direction: d.normalize(), depth: *depth }).collect(),
            max_range: 4.5,
            fov_h_deg: 80.0,
            fov_v_deg: 60.0,
        }
    }

    fn map() -> VoxelMap {
        VoxelMap::new(Vec3::zeros(), [60, 20, 20], 0.1, 1.0).unwrap()
    }

    #[test]
    fn free_space_ray_marks_nothing_occupied() {
        let mut m = map();
        let f = frame(Vec3::new(0.55, 1.05, 1.05), &[(Vec3::x(), 4.5)]);
        let r = integrate_frame(&mut m, &f).unwrap();
        assert_eq!(m.count(VoxelState::Occupied), 0);
        // voxels x = 5 ..= 50 are entered before 4.5 m
        assert_eq!(m.count(VoxelState::Free), 46);
        assert_eq!(r.extent(), [46, 1, 1]);
    }

    #[test]
    fn hit_marks_endpoint_occupied() {
        let mut m = map();
        let f = frame(Vec3::new(0.55, 1.05, 1.05), &[(Vec3::x(), 2.0)]);
        integrate_frame(&mut m, &f).unwrap();
        // hit point x = 2.55 lies in voxel 25
        assert_eq!(m.state(Voxel::new(25, 10, 10)), Some(VoxelState::Occupied));
        for x in 5..25 {
            assert_eq!(m.state(Voxel::new(x, 10, 10)), Some(VoxelState::Free));
        }
        assert_eq!(m.state(Voxel::new(26, 10, 10)), Some(VoxelState::Unknown));
    }

    #[test]
    fn repeat_frame_changes_nothing() {
        let mut m = map();
        let dirs: Vec<_> = (0..30)
            .map(|i| (Vec3::new(1.0, (i as f64 - 15.0) * 0.03, (i % 7) as f64 * 0.05 - 0.15), 1.0 + i as f64 * 0.1))
            .collect();
        let f = frame(Vec3::new(0.55, 1.05, 1.05), &dirs);
        let first = integrate_frame(&mut m, &f).unwrap();
        assert!(!first.is_empty());
        let before = m.states().to_vec();
        let second = integrate_frame(&mut m, &f).unwrap();
        assert!(second.is_empty());
        assert_eq!(before, m.states());
    }

    #[test]
    fn occupied_wins_within_a_frame() {
        let mut m = map();
        // the short ray ends where the long ray passes
        let f = frame(Vec3::new(0.55, 1.05, 1.05), &[(Vec3::x(), 3.0), (Vec3::x(), 1.0)]);
        integrate_frame(&mut m, &f).unwrap();
        assert_eq!(m.state(Voxel::new(15, 10, 10)), Some(VoxelState::Occupied));
    }

    #[test]
    fn pose_outside_is_rejected() {
        let mut m = map();
        let f = frame(Vec3::new(-1.0, 1.0, 1.0), &[(Vec3::x(), 1.0)]);
        assert!(matches!(integrate_frame(&mut m, &f), Err(MapError::PoseOutOfBounds(..))));
    }
}
