//! JSON map snapshot with run-length-encoded states.

use serde::{Deserialize, Serialize};

use super::{MapError, VoxelMap, VoxelState};
use crate::geom::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub resolution: f64,
    pub origin: [f64; 3],
    pub dims: [usize; 3],
    /// `[state code, run length]` pairs in x-fastest voxel order.
    /// Codes: 0 unknown, 1 free, 2 occupied.
    pub states_rle: Vec<[u64; 2]>,
}

impl MapSnapshot {
    pub fn capture(map: &VoxelMap) -> Self {
        let mut rle: Vec<[u64; 2]> = Vec::new();
        for s in map.states() {
            let c = s.code() as u64;
            match rle.last_mut() {
                Some(last) if last[0] == c => last[1] += 1,
                _ => rle.push([c, 1]),
            }
        }
        let o = map.origin();
        MapSnapshot { resolution: map.resolution(), origin: [o.x, o.y, o.z], dims: map.dims(), states_rle: rle }
    }

    /// Rebuilds a map (clearance is recomputed from scratch).
    pub fn restore(&self, clearance_cap: f64) -> Result<VoxelMap, MapError> {
        let mut map = VoxelMap::new(Vec3::from(self.origin), self.dims, self.resolution, clearance_cap)?;
        let mut i = 0usize;
        for [c, n] in &self.states_rle {
            let s = VoxelState::from_code(*c as u8)
                .ok_or_else(|| MapError::InvalidGeometry(format!("bad state code {c}")))?;
            for _ in 0..*n {
                if i >= map.len() {
                    return Err(MapError::InvalidGeometry("run lengths exceed map size".into()));
                }
                let v = map.voxel_of_index(i);
                map.set_state(v, s);
                i += 1;
            }
        }
        if i != map.len() {
            return Err(MapError::InvalidGeometry("run lengths do not cover the map".into()));
        }
        map.refresh_clearance();
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn snapshot_round_trips(codes in proptest::collection::vec(0u8..3, 64)) {
            let mut m = VoxelMap::new(Vec3::new(1.0, -2.0, 0.5), [4, 4, 4], 0.2, 1.0).unwrap();
            for (i, c) in codes.iter().enumerate() {
                let v = m.voxel_of_index(i);
                m.set_state(v, VoxelState::from_code(*c).unwrap());
            }
            let snap = MapSnapshot::capture(&m);
            let json = serde_json::to_string(&snap).unwrap();
            let back: MapSnapshot = serde_json::from_str(&json).unwrap();
            let m2 = back.restore(1.0).unwrap();
            prop_assert_eq!(m.states(), m2.states());
            prop_assert_eq!(m2.origin(), m.origin());
        }
    }
}
