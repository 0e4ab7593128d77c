use serde::{Deserialize, Serialize};

use super::Voxel;

/// Half-open voxel box `[lo, hi)`. Empty when any `lo >= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelBox {
    pub lo: Voxel,
    pub hi: Voxel,
}

impl Default for VoxelBox {
    fn default() -> Self {
        VoxelBox::empty()
    }
}

impl VoxelBox {
    pub fn new(lo: Voxel, hi: Voxel) -> Self {
        VoxelBox { lo, hi }
    }

    pub fn empty() -> Self {
        VoxelBox {
            lo: Voxel::new(i32::MAX, i32::MAX, i32::MAX),
            hi: Voxel::new(i32::MIN, i32::MIN, i32::MIN),
        }
    }

    pub fn single(v: Voxel) -> Self {
        VoxelBox { lo: v, hi: v.offset([1, 1, 1]) }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.x >= self.hi.x || self.lo.y >= self.hi.y || self.lo.z >= self.hi.z
    }

    pub fn include(&mut self, v: Voxel) {
        self.lo = Voxel::new(self.lo.x.min(v.x), self.lo.y.min(v.y), self.lo.z.min(v.z));
        self.hi = Voxel::new(self.hi.x.max(v.x + 1), self.hi.y.max(v.y + 1), self.hi.z.max(v.z + 1));
    }

    pub fn union(&self, o: &VoxelBox) -> VoxelBox {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        VoxelBox::new(
            Voxel::new(self.lo.x.min(o.lo.x), self.lo.y.min(o.lo.y), self.lo.z.min(o.lo.z)),
            Voxel::new(self.hi.x.max(o.hi.x), self.hi.y.max(o.hi.y), self.hi.z.max(o.hi.z)),
        )
    }

    pub fn intersection(&self, o: &VoxelBox) -> VoxelBox {
        let b = VoxelBox::new(
            Voxel::new(self.lo.x.max(o.lo.x), self.lo.y.max(o.lo.y), self.lo.z.max(o.lo.z)),
            Voxel::new(self.hi.x.min(o.hi.x), self.hi.y.min(o.hi.y), self.hi.z.min(o.hi.z)),
        );
        if b.is_empty() {
            VoxelBox::empty()
        } else {
            b
        }
    }

    pub fn intersects(&self, o: &VoxelBox) -> bool {
        !self.intersection(o).is_empty()
    }

    pub fn expanded(&self, n: i32) -> VoxelBox {
        if self.is_empty() {
            return *self;
        }
        VoxelBox::new(self.lo.offset([-n, -n, -n]), self.hi.offset([n, n, n]))
    }

    pub fn contains(&self, v: Voxel) -> bool {
        v.x >= self.lo.x
            && v.y >= self.lo.y
            && v.z >= self.lo.z
            && v.x < self.hi.x
            && v.y < self.hi.y
            && v.z < self.hi.z
    }

    pub fn contains_box(&self, o: &VoxelBox) -> bool {
        o.is_empty()
            || (o.lo.x >= self.lo.x
                && o.lo.y >= self.lo.y
                && o.lo.z >= self.lo.z
                && o.hi.x <= self.hi.x
                && o.hi.y <= self.hi.y
                && o.hi.z <= self.hi.z)
    }

    pub fn extent(&self) -> [i32; 3] {
        if self.is_empty() {
            return [0; 3];
        }
        [self.hi.x - self.lo.x, self.hi.y - self.lo.y, self.hi.z - self.lo.z]
    }

    pub fn volume(&self) -> usize {
        let e = self.extent();
        e[0] as usize * e[1] as usize * e[2] as usize
    }

    /// Iterates voxels in x-fastest order.
    pub fn iter(&self) -> impl Iterator<Item = Voxel> {
        let b = *self;
        let (zs, ys, xs) = if b.is_empty() {
            (0..0, 0..0, 0..0)
        } else {
            (b.lo.z..b.hi.z, b.lo.y..b.hi.y, b.lo.x..b.hi.x)
        };
        zs.flat_map(move |z| {
            let xs = xs.clone();
            ys.clone().flat_map(move |y| xs.clone().map(move |x| Voxel::new(x, y, z)))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn include_and_iter() {
        let mut b = VoxelBox::empty();
        assert!(b.is_empty());
        b.include(Voxel::new(1, 2, 3));
        b.include(Voxel::new(2, 2, 4));
        assert_eq!(b.extent(), [2, 1, 2]);
        assert_eq!(b.iter().count(), 4);
        assert!(b.contains(Voxel::new(2, 2, 3)));
        assert_eq!(VoxelBox::empty().iter().count(), 0);
    }

    #[test]
    fn intersection_of_disjoint_is_empty() {
        let a = VoxelBox::new(Voxel::new(0, 0, 0), Voxel::new(2, 2, 2));
        let b = VoxelBox::new(Voxel::new(2, 0, 0), Voxel::new(4, 2, 2));
        assert!(!a.intersects(&b));
        assert!(a.union(&b).contains_box(&b));
    }
}
