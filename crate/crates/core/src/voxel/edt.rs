//! Exact squared Euclidean distance transform (separable lower-envelope method)
//! over a sub-box of the map.

use super::{Voxel, VoxelBox, VoxelMap, VoxelState};

const INF: f64 = 1e20;

/// One-dimensional squared distance transform of sampled function `f`.
fn transform_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -INF;
    z[1] = INF;
    for q in 1..n {
        if f[q] >= INF {
            continue;
        }
        loop {
            let p = v[k];
            if f[p] >= INF {
                // A lone infinite seed is replaced outright.
                v[k] = q;
                z[k + 1] = INF;
                break;
            }
            let qf = q as f64;
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = INF;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = INF;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k];
        if f[p] >= INF {
            d[q] = INF;
        } else {
            let pf = p as f64;
            d[q] = (qf - pf) * (qf - pf) + f[p];
        }
    }
}

/// Recomputes clearance for `write` using obstacles inside `compute`.
pub(super) fn refresh(map: &mut VoxelMap, compute: &VoxelBox, write: &VoxelBox) {
    let [ex, ey, ez] = compute.extent();
    let (ex, ey, ez) = (ex as usize, ey as usize, ez as usize);
    let n = ex * ey * ez;
    let mut g = vec![INF; n];
    let lo = compute.lo;
    let at = |x: usize, y: usize, z: usize| x + ex * (y + ey * z);
    for z in 0..ez {
        for y in 0..ey {
            for x in 0..ex {
                let v = Voxel::new(lo.x + x as i32, lo.y + y as i32, lo.z + z as i32);
                if map.states[map.index_unchecked(v)] == VoxelState::Occupied {
                    g[at(x, y, z)] = 0.0;
                }
            }
        }
    }
    let m = ex.max(ey).max(ez);
    let mut f = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut vbuf = vec![0usize; m];
    let mut zbuf = vec![0.0; m + 1];
    // x pass
    for z in 0..ez {
        for y in 0..ey {
            for x in 0..ex {
                f[x] = g[at(x, y, z)];
            }
            transform_1d(&f[..ex], &mut d[..ex], &mut vbuf, &mut zbuf);
            for x in 0..ex {
                g[at(x, y, z)] = d[x];
            }
        }
    }
    // y pass
    for z in 0..ez {
        for x in 0..ex {
            for y in 0..ey {
                f[y] = g[at(x, y, z)];
            }
            transform_1d(&f[..ey], &mut d[..ey], &mut vbuf, &mut zbuf);
            for y in 0..ey {
                g[at(x, y, z)] = d[y];
            }
        }
    }
    // z pass
    for y in 0..ey {
        for x in 0..ex {
            for z in 0..ez {
                f[z] = g[at(x, y, z)];
            }
            transform_1d(&f[..ez], &mut d[..ez], &mut vbuf, &mut zbuf);
            for z in 0..ez {
                g[at(x, y, z)] = d[z];
            }
        }
    }
    let cap = map.clearance_cap;
    let res = map.resolution;
    for v in write.iter() {
        let (x, y, z) = ((v.x - lo.x) as usize, (v.y - lo.y) as usize, (v.z - lo.z) as usize);
        let sq = g[at(x, y, z)];
        let dist = if sq >= INF { cap } else { (sq.sqrt() * res).min(cap) };
        let i = map.index_unchecked(v);
        map.clearance[i] = dist;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(map: &VoxelMap, v: Voxel) -> f64 {
        let mut best: Option<i64> = None;
        for i in 0..map.len() {
            if map.state_at_index(i) == VoxelState::Occupied {
                let d2 = v.squared_distance(map.voxel_of_index(i));
                best = Some(best.map_or(d2, |b| b.min(d2)));
            }
        }
        match best {
            None => map.clearance_cap(),
            Some(d2) => ((d2 as f64).sqrt() * map.resolution()).min(map.clearance_cap()),
        }
    }

    #[test]
    fn single_obstacle_neighbour_is_one_resolution() {
        let mut m = VoxelMap::new(Vec3::zeros(), [5, 5, 5], 0.1, 1.0).unwrap();
        m.set_state(Voxel::new(2, 2, 2), VoxelState::Occupied);
        m.refresh_clearance();
        assert_eq!(m.clearance(Voxel::new(3, 2, 2)), Some(0.1));
        assert_eq!(m.clearance(Voxel::new(2, 2, 2)), Some(0.0));
    }

    #[test]
    fn no_obstacles_gives_cap() {
        let mut m = VoxelMap::new(Vec3::zeros(), [6, 6, 6], 0.1, 0.35).unwrap();
        m.recompute_clearance(&m.full_box());
        assert!(m.full_box().iter().all(|v| m.clearance(v) == Some(0.35)));
    }

    #[test]
    fn random_maps_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..4 {
            let mut m = VoxelMap::new(Vec3::zeros(), [20, 20, 20], 0.1, 5.0).unwrap();
            let density = [0.001, 0.01, 0.05, 0.3][trial];
            for v in m.full_box().iter().collect::<Vec<_>>() {
                if rng.gen_bool(density) {
                    m.set_state(v, VoxelState::Occupied);
                }
            }
            m.recompute_clearance(&m.full_box());
            for v in m.full_box().iter() {
                assert_eq!(m.clearance(v).unwrap(), brute(&m, v), "voxel {v:?} trial {trial}");
            }
            // zero exactly on obstacles
            for v in m.full_box().iter() {
                let occ = m.state(v) == Some(VoxelState::Occupied);
                assert_eq!(m.clearance(v) == Some(0.0), occ);
            }
        }
    }

    #[test]
    fn local_refresh_is_exact_within_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = VoxelMap::new(Vec3::zeros(), [24, 24, 24], 0.1, 0.4).unwrap();
        for v in m.full_box().iter().collect::<Vec<_>>() {
            if rng.gen_bool(0.02) {
                m.set_state(v, VoxelState::Occupied);
            }
        }
        m.refresh_clearance();
        for _ in 0..10 {
            let v = Voxel::new(rng.gen_range(0..24), rng.gen_range(0..24), rng.gen_range(0..24));
            m.set_state(v, VoxelState::Occupied);
            m.refresh_clearance();
        }
        for v in m.full_box().iter() {
            assert_eq!(m.clearance(v).unwrap(), brute(&m, v));
        }
    }
}
