//! Occupancy voxel map: state storage, sensor integration, clearance field and
//! altitude-slab views.
//!
//! Knowledge is monotone. A voxel leaves `Unknown` at most once and never goes
//! back; `Occupied` is sticky. The clearance field holds the distance from each
//! voxel centre to the nearest `Occupied` centre, capped at a configured radius,
//! and is refreshed in batch over the regions touched since the last refresh.

mod edt;
pub mod raycast;
mod region;
pub mod sensor;
pub mod snapshot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

pub use region::VoxelBox;
pub use sensor::{integrate_frame, integrate_frame_with, RangeReturn, SensorFrame};

/// Axis-aligned box of voxels touched by an update.
pub type UpdateRegion = VoxelBox;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("sensor origin ({0:.3}, {1:.3}, {2:.3}) lies outside the map")]
    PoseOutOfBounds(f64, f64, f64),
    #[error("slab [{z_lo}, {z_hi}) does not intersect the map")]
    EmptySlab { z_lo: f64, z_hi: f64 },
    #[error("invalid map geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[repr(u8)]
pub enum VoxelState {
    #[default]
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl VoxelState {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(VoxelState::Unknown),
            1 => Some(VoxelState::Free),
            2 => Some(VoxelState::Occupied),
            _ => None,
        }
    }
}

/// Integer voxel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Voxel {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl Voxel {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Voxel { x, y, z }
    }

    pub fn offset(self, d: [i32; 3]) -> Voxel {
        Voxel::new(self.x + d[0], self.y + d[1], self.z + d[2])
    }

    pub fn axis(self, a: usize) -> i32 {
        match a {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn set_axis(&mut self, a: usize, v: i32) {
        match a {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
    }

    pub fn squared_distance(self, o: Voxel) -> i64 {
        let dx = (self.x - o.x) as i64;
        let dy = (self.y - o.y) as i64;
        let dz = (self.z - o.z) as i64;
        dx * dx + dy * dy + dz * dz
    }
}

/// The six face neighbours.
pub const FACE_OFFSETS: [[i32; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// All 26 neighbours, in a fixed order.
pub fn neighbor_offsets_26() -> impl Iterator<Item = [i32; 3]> {
    (-1..=1).flat_map(|dz| {
        (-1..=1).flat_map(move |dy| {
            (-1..=1).filter_map(move |dx| {
                if dx == 0 && dy == 0 && dz == 0 {
                    None
                } else {
                    Some([dx, dy, dz])
                }
            })
        })
    })
}

/// Whether unknown space counts as an obstacle for clearance queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearanceMode {
    #[default]
    Pessimistic,
    Optimistic,
}

#[derive(Clone, Debug)]
pub struct VoxelMap {
    resolution: f64,
    origin: Vec3,
    dims: [usize; 3],
    states: Vec<VoxelState>,
    clearance: Vec<f64>,
    clearance_cap: f64,
    /// Voxels that became occupied since the last clearance refresh.
    stale: VoxelBox,
    /// Neighbour offsets within `clearance_cap`, sorted by distance.
    ball: Vec<([i32; 3], f64)>,
}

impl VoxelMap {
    pub fn new(origin: Vec3, dims: [usize; 3], resolution: f64, clearance_cap: f64) -> Result<Self, MapError> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(MapError::InvalidGeometry(format!("resolution {resolution}")));
        }
        if dims.iter().any(|&d| d == 0 || d > i32::MAX as usize / 4) {
            return Err(MapError::InvalidGeometry(format!("dims {dims:?}")));
        }
        if !(clearance_cap > 0.0) {
            return Err(MapError::InvalidGeometry(format!("clearance cap {clearance_cap}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(VoxelMap {
            resolution,
            origin,
            dims,
            states: vec![VoxelState::Unknown; n],
            clearance: vec![clearance_cap; n],
            clearance_cap,
            stale: VoxelBox::empty(),
            ball: build_ball(resolution, clearance_cap),
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn clearance_cap(&self) -> f64 {
        self.clearance_cap
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// World-space upper corner.
    pub fn upper_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64 * self.resolution,
                self.dims[1] as f64 * self.resolution,
                self.dims[2] as f64 * self.resolution,
            )
    }

    pub fn full_box(&self) -> VoxelBox {
        VoxelBox::new(
            Voxel::new(0, 0, 0),
            Voxel::new(self.dims[0] as i32, self.dims[1] as i32, self.dims[2] as i32),
        )
    }

    #[inline]
    pub fn in_bounds(&self, v: Voxel) -> bool {
        v.x >= 0
            && v.y >= 0
            && v.z >= 0
            && (v.x as usize) < self.dims[0]
            && (v.y as usize) < self.dims[1]
            && (v.z as usize) < self.dims[2]
    }

    #[inline]
    pub fn index(&self, v: Voxel) -> Option<usize> {
        if self.in_bounds(v) {
            Some(self.index_unchecked(v))
        } else {
            None
        }
    }

    #[inline]
    pub(crate) fn index_unchecked(&self, v: Voxel) -> usize {
        v.x as usize + self.dims[0] * (v.y as usize + self.dims[1] * v.z as usize)
    }

    pub fn voxel_of_index(&self, i: usize) -> Voxel {
        let x = i % self.dims[0];
        let r = i / self.dims[0];
        let y = r % self.dims[1];
        let z = r / self.dims[1];
        Voxel::new(x as i32, y as i32, z as i32)
    }

    /// Voxel containing the world point (may be out of bounds).
    pub fn voxel_at(&self, p: &Vec3) -> Voxel {
        let g = (p - self.origin) / self.resolution;
        Voxel::new(g.x.floor() as i32, g.y.floor() as i32, g.z.floor() as i32)
    }

    pub fn center(&self, v: Voxel) -> Vec3 {
        self.origin
            + Vec3::new(
                (v.x as f64 + 0.5) * self.resolution,
                (v.y as f64 + 0.5) * self.resolution,
                (v.z as f64 + 0.5) * self.resolution,
            )
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.in_bounds(self.voxel_at(p))
    }

    pub fn state(&self, v: Voxel) -> Option<VoxelState> {
        self.index(v).map(|i| self.states[i])
    }

    #[inline]
    pub fn state_at_index(&self, i: usize) -> VoxelState {
        self.states[i]
    }

    pub fn states(&self) -> &[VoxelState] {
        &self.states
    }

    pub fn count(&self, s: VoxelState) -> usize {
        self.states.iter().filter(|&&x| x == s).count()
    }

    /// Applies a state transition respecting monotone knowledge: nothing
    /// returns to `Unknown` and `Occupied` is never downgraded.
    /// Returns the previous state when a change happened.
    pub(crate) fn promote(&mut self, i: usize, to: VoxelState) -> Option<VoxelState> {
        let old = self.states[i];
        let new = match (old, to) {
            (_, VoxelState::Unknown) => old,
            (VoxelState::Occupied, _) => old,
            (VoxelState::Free, VoxelState::Free) => old,
            (_, t) => t,
        };
        if new == old {
            return None;
        }
        self.states[i] = new;
        if new == VoxelState::Occupied {
            let v = self.voxel_of_index(i);
            self.stale.include(v);
        }
        Some(old)
    }

    /// Forces a voxel state. Used by world construction and tests; bypasses
    /// the monotonicity rule.
    pub fn set_state(&mut self, v: Voxel, s: VoxelState) {
        if let Some(i) = self.index(v) {
            if s == VoxelState::Occupied || self.states[i] == VoxelState::Occupied {
                self.stale.include(v);
            }
            self.states[i] = s;
        }
    }

    /// Marks the outermost voxel layer occupied: the map's bounding box is
    /// known to be closed. Returns the number of voxels changed.
    pub fn close_shell(&mut self) -> usize {
        let [nx, ny, nz] = self.dims;
        let mut n = 0;
        for i in 0..self.states.len() {
            let v = self.voxel_of_index(i);
            let (x, y, z) = (v.x as usize, v.y as usize, v.z as usize);
            if (x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz)
                && self.promote(i, VoxelState::Occupied).is_some()
            {
                n += 1;
            }
        }
        n
    }

    /// Marks every unknown voxel whose centre lies within `radius` of `p` as free.
    pub fn clear_sphere(&mut self, p: &Vec3, radius: f64) -> usize {
        let c = self.voxel_at(p);
        let r = (radius / self.resolution).ceil() as i32 + 1;
        let mut n = 0;
        for dz in -r..=r {
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = c.offset([dx, dy, dz]);
                    if let Some(i) = self.index(v) {
                        if (self.center(v) - p).norm() <= radius
                            && self.promote(i, VoxelState::Free).is_some()
                        {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    /// Region whose clearance may be out of date.
    pub fn stale_region(&self) -> VoxelBox {
        self.stale
    }

    pub fn clearance_is_fresh(&self) -> bool {
        self.stale.is_empty()
    }

    /// Raw clearance value in metres (distance to nearest occupied voxel, capped).
    pub fn clearance(&self, v: Voxel) -> Option<f64> {
        self.index(v).map(|i| self.clearance[i])
    }

    /// Recomputes the clearance field over every voxel within the cap radius of
    /// `region` using an exact Euclidean distance transform.
    pub fn recompute_clearance(&mut self, region: &UpdateRegion) {
        if region.is_empty() {
            return;
        }
        let pad = (self.clearance_cap / self.resolution).ceil() as i32;
        let full = self.full_box();
        let write = region.expanded(pad).intersection(&full);
        let compute = region.expanded(2 * pad).intersection(&full);
        if write.is_empty() {
            return;
        }
        edt::refresh(self, &compute, &write);
        if region.contains_box(&self.stale) {
            self.stale = VoxelBox::empty();
        }
    }

    /// Brings the clearance field up to date with every change so far.
    pub fn refresh_clearance(&mut self) {
        let s = self.stale;
        if !s.is_empty() {
            self.recompute_clearance(&s);
        }
        self.stale = VoxelBox::empty();
    }

    /// Clearance at `v` under the given mode. Pessimistic mode also treats
    /// unknown voxels (and the space outside the map) as obstacles.
    pub fn clearance_at(&self, v: Voxel, mode: ClearanceMode) -> f64 {
        let Some(i) = self.index(v) else { return 0.0 };
        match mode {
            ClearanceMode::Optimistic => self.clearance[i],
            ClearanceMode::Pessimistic => {
                if self.states[i] != VoxelState::Free {
                    return 0.0;
                }
                let mut best = self.clearance[i];
                for (o, d) in &self.ball {
                    if *d >= best {
                        break;
                    }
                    match self.state(v.offset(*o)) {
                        Some(VoxelState::Free) => {}
                        _ => {
                            best = *d;
                            break;
                        }
                    }
                }
                best
            }
        }
    }

    /// True when clearance at `v` is at least `margin`.
    pub fn is_safe(&self, v: Voxel, margin: f64, mode: ClearanceMode) -> bool {
        let Some(i) = self.index(v) else { return false };
        match mode {
            ClearanceMode::Optimistic => {
                self.states[i] != VoxelState::Occupied && self.clearance[i] >= margin
            }
            ClearanceMode::Pessimistic => {
                if self.states[i] != VoxelState::Free {
                    return false;
                }
                if margin > self.clearance_cap {
                    return self.clearance_at(v, mode) >= margin;
                }
                for (o, d) in &self.ball {
                    if *d >= margin {
                        break;
                    }
                    if self.state(v.offset(*o)) != Some(VoxelState::Free) {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Read-only view restricted to the slab `z_lo <= z < z_hi` (voxel centres).
    pub fn clip_to_layer(&self, z_lo: f64, z_hi: f64) -> Result<LayerView<'_>, MapError> {
        if !(z_lo < z_hi) {
            return Err(MapError::EmptySlab { z_lo, z_hi });
        }
        let k_of = |z: f64| ((z - self.origin.z) / self.resolution - 0.5 - 1e-9).ceil();
        let k_lo = k_of(z_lo).max(0.0);
        let k_hi = k_of(z_hi).min(self.dims[2] as f64);
        if k_lo >= k_hi {
            return Err(MapError::EmptySlab { z_lo, z_hi });
        }
        Ok(LayerView { map: self, k_lo: k_lo as i32, k_hi: k_hi as i32, z_lo, z_hi })
    }

    /// View covering the whole map.
    pub fn full_view(&self) -> LayerView<'_> {
        LayerView {
            map: self,
            k_lo: 0,
            k_hi: self.dims[2] as i32,
            z_lo: self.origin.z,
            z_hi: self.upper_corner().z,
        }
    }
}

fn build_ball(resolution: f64, cap: f64) -> Vec<([i32; 3], f64)> {
    let r = (cap / resolution).ceil() as i32;
    let mut out = Vec::new();
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy + dz * dz) as i64;
                if d2 == 0 {
                    continue;
                }
                let d = (d2 as f64).sqrt() * resolution;
                if d <= cap {
                    out.push(([dx, dy, dz], d2, d));
                }
            }
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    out.into_iter().map(|(o, _, d)| (o, d)).collect()
}

/// Map view restricted to a horizontal slab. Voxels outside the slab behave
/// as if absent.
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    map: &'a VoxelMap,
    k_lo: i32,
    k_hi: i32,
    z_lo: f64,
    z_hi: f64,
}

impl<'a> LayerView<'a> {
    pub fn map(&self) -> &'a VoxelMap {
        self.map
    }

    /// Voxel z-index range `[lo, hi)`.
    pub fn k_range(&self) -> (i32, i32) {
        (self.k_lo, self.k_hi)
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.z_lo, self.z_hi)
    }

    #[inline]
    pub fn contains(&self, v: Voxel) -> bool {
        v.z >= self.k_lo && v.z < self.k_hi && self.map.in_bounds(v)
    }

    #[inline]
    pub fn state(&self, v: Voxel) -> Option<VoxelState> {
        if self.contains(v) {
            Some(self.map.states[self.map.index_unchecked(v)])
        } else {
            None
        }
    }

    pub fn bounds(&self) -> VoxelBox {
        let d = self.map.dims;
        VoxelBox::new(Voxel::new(0, 0, self.k_lo), Voxel::new(d[0] as i32, d[1] as i32, self.k_hi))
    }

    /// Same slab floor-to-ceiling extended down to the bottom of the map.
    pub fn with_floor_at_bottom(&self) -> LayerView<'a> {
        LayerView { k_lo: 0, z_lo: self.map.origin.z, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(n: usize) -> VoxelMap {
        VoxelMap::new(Vec3::zeros(), [n, n, n], 0.1, 1.0).unwrap()
    }

    #[test]
    fn index_round_trip() {
        let m = VoxelMap::new(Vec3::zeros(), [3, 4, 5], 0.1, 1.0).unwrap();
        for i in 0..m.len() {
            assert_eq!(m.index(m.voxel_of_index(i)), Some(i));
        }
        assert_eq!(m.index(Voxel::new(3, 0, 0)), None);
    }

    #[test]
    fn promote_is_monotone() {
        let mut m = map(2);
        assert_eq!(m.promote(0, VoxelState::Free), Some(VoxelState::Unknown));
        assert_eq!(m.promote(0, VoxelState::Unknown), None);
        assert_eq!(m.promote(0, VoxelState::Occupied), Some(VoxelState::Free));
        assert_eq!(m.promote(0, VoxelState::Free), None);
        assert_eq!(m.state_at_index(0), VoxelState::Occupied);
    }

    #[test]
    fn shell_count() {
        let mut m = VoxelMap::new(Vec3::zeros(), [4, 5, 6], 0.1, 1.0).unwrap();
        m.set_state(Voxel::new(1, 1, 1), VoxelState::Free);
        m.set_state(Voxel::new(0, 2, 2), VoxelState::Occupied);
        // 4*5*6 minus the 2*3*4 interior, less the voxel already occupied
        assert_eq!(m.close_shell(), 120 - 24 - 1);
        assert_eq!(m.state(Voxel::new(1, 1, 1)), Some(VoxelState::Free));
        assert_eq!(m.state(Voxel::new(3, 4, 5)), Some(VoxelState::Occupied));
        assert_eq!(m.state(Voxel::new(2, 2, 2)), Some(VoxelState::Unknown));
        assert_eq!(m.close_shell(), 0);
    }

    #[test]
    fn layer_zero_and_one() {
        let m = VoxelMap::new(Vec3::zeros(), [10, 10, 90], 0.1, 1.0).unwrap();
        let l0 = m.clip_to_layer(0.0, 3.0).unwrap();
        assert_eq!(l0.k_range(), (0, 30));
        let l1 = m.clip_to_layer(3.0, 6.0).unwrap();
        assert_eq!(l1.k_range(), (30, 60));
        assert!(l1.state(Voxel::new(0, 0, 29)).is_none());
        assert!(l1.state(Voxel::new(0, 0, 30)).is_some());
    }

    #[test]
    fn whole_map_slab_equals_full_view() {
        let m = map(5);
        let v = m.clip_to_layer(-10.0, 10.0).unwrap();
        assert_eq!(v.k_range(), m.full_view().k_range());
        assert_eq!(v.bounds(), m.full_box());
    }

    #[test]
    fn slab_outside_map_is_rejected() {
        let m = map(5);
        assert!(matches!(m.clip_to_layer(5.0, 6.0), Err(MapError::EmptySlab { .. })));
        assert!(matches!(m.clip_to_layer(0.3, 0.3), Err(MapError::EmptySlab { .. })));
    }

    #[test]
    fn pessimistic_treats_unknown_as_obstacle() {
        let mut m = map(9);
        for i in 0..m.len() {
            m.promote(i, VoxelState::Free);
        }
        let c = Voxel::new(4, 4, 4);
        assert!(m.is_safe(c, 0.3, ClearanceMode::Pessimistic));
        let mut m2 = map(9);
        m2.clear_sphere(&m2.center(c), 0.15);
        assert!(!m2.is_safe(c, 0.3, ClearanceMode::Pessimistic));
        assert!(m2.is_safe(c, 0.3, ClearanceMode::Optimistic));
        // nearest unknown is a corner neighbour
        assert!((m2.clearance_at(c, ClearanceMode::Pessimistic) - 3f64.sqrt() * 0.1).abs() < 1e-12);
    }
}
