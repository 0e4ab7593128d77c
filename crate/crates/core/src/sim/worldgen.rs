//! Seeded world generators: recursive-division mazes and multi-level plants.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pose, SimError, WorldModel};
use crate::geom::Vec3;
use crate::voxel::Voxel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MazeParams {
    /// Nominal corridor cell size (m).
    pub cell_size: f64,
    pub wall_thickness: f64,
    pub door_width: f64,
}

impl Default for MazeParams {
    fn default() -> Self {
        MazeParams { cell_size: 2.0, wall_thickness: 0.2, door_width: 1.0 }
    }
}

pub fn generate_maze(dims_m: [f64; 3], resolution: f64, seed: u64) -> Result<WorldModel, SimError> {
    generate_maze_with(dims_m, resolution, seed, &MazeParams::default())
}

struct Wall {
    /// 0: wall at constant x, 1: wall at constant y.
    normal_axis: usize,
    boundary: usize,
    span: (usize, usize),
    door_cell: usize,
}

/// Recursive-division maze with full-height walls and one door per wall.
pub fn generate_maze_with(
    dims_m: [f64; 3],
    resolution: f64,
    seed: u64,
    params: &MazeParams,
) -> Result<WorldModel, SimError> {
    let placeholder = Pose { position: Vec3::zeros(), yaw: 0.0 };
    let mut w = WorldModel::closed_box(dims_m, resolution, placeholder)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = w.dims();
    let inner = [dims[0] as f64 * resolution - 2.0 * resolution, dims[1] as f64 * resolution - 2.0 * resolution];
    let ncell = [
        ((inner[0] / params.cell_size).floor() as usize).max(1),
        ((inner[1] / params.cell_size).floor() as usize).max(1),
    ];
    let cell_w = [inner[0] / ncell[0] as f64, inner[1] / ncell[1] as f64];
    let coord = |axis: usize, b: f64| resolution + b * cell_w[axis];

    let mut walls = Vec::new();
    let mut stack = vec![(0usize, 0usize, ncell[0], ncell[1])];
    while let Some((x0, y0, x1, y1)) = stack.pop() {
        let (wx, wy) = (x1 - x0, y1 - y0);
        if wx < 2 && wy < 2 {
            continue;
        }
        let split_x = if wx >= 2 && wy >= 2 {
            if wx == wy {
                rng.gen_bool(0.5)
            } else {
                wx > wy
            }
        } else {
            wx >= 2
        };
        if split_x {
            let b = rng.gen_range(x0 + 1..x1);
            let door = rng.gen_range(y0..y1);
            walls.push(Wall { normal_axis: 0, boundary: b, span: (y0, y1), door_cell: door });
            stack.push((x0, y0, b, y1));
            stack.push((b, y0, x1, y1));
        } else {
            let b = rng.gen_range(y0 + 1..y1);
            let door = rng.gen_range(x0..x1);
            walls.push(Wall { normal_axis: 1, boundary: b, span: (x0, x1), door_cell: door });
            stack.push((x0, y0, x1, b));
            stack.push((x0, b, x1, y1));
        }
    }

    let h = dims[2] as f64 * resolution;
    let t = params.wall_thickness / 2.0;
    for wall in &walls {
        let a = wall.normal_axis;
        let along = 1 - a;
        let c = coord(a, wall.boundary as f64);
        let (s0, s1) = (coord(along, wall.span.0 as f64), coord(along, wall.span.1 as f64));
        let mut min = Vec3::new(0.0, 0.0, 0.0);
        let mut max = Vec3::new(0.0, 0.0, h);
        min[a] = c - t;
        max[a] = c + t;
        min[along] = s0 - t;
        max[along] = s1 + t;
        w.fill_box(min, max, true);
    }
    for wall in &walls {
        let a = wall.normal_axis;
        let along = 1 - a;
        let c = coord(a, wall.boundary as f64);
        let mid = coord(along, wall.door_cell as f64 + 0.5);
        let mut min = Vec3::new(0.0, 0.0, resolution);
        let mut max = Vec3::new(0.0, 0.0, h - resolution);
        min[a] = c - t;
        max[a] = c + t;
        min[along] = mid - params.door_width / 2.0;
        max[along] = mid + params.door_width / 2.0;
        w.fill_box(min, max, false);
    }

    let (ci, cj) = (rng.gen_range(0..ncell[0]), rng.gen_range(0..ncell[1]));
    let spawn = Vec3::new(coord(0, ci as f64 + 0.5), coord(1, cj as f64 + 0.5), h / 2.0);
    w.spawn = Pose { position: snap_to_center(&w, spawn), yaw: 0.0 };
    w.validate()?;
    w.seal_unreachable();
    Ok(w)
}

fn snap_to_center(w: &WorldModel, p: Vec3) -> Vec3 {
    w.center(w.voxel_at(&p))
}

/// Plant-like world: full-height columns, tanks, elevated platforms and
/// walkways at many heights.
pub fn generate_plant(dims_m: [f64; 3], resolution: f64, seed: u64) -> Result<WorldModel, SimError> {
    let placeholder = Pose { position: Vec3::zeros(), yaw: 0.0 };
    let mut w = WorldModel::closed_box(dims_m, resolution, placeholder)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [lx, ly, lz] = [
        w.dims()[0] as f64 * resolution,
        w.dims()[1] as f64 * resolution,
        w.dims()[2] as f64 * resolution,
    ];
    let area = lx * ly;
    let margin = 1.5_f64.min(lx / 4.0).min(ly / 4.0);
    let rand_in = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if hi > lo { rng.gen_range(lo..hi) } else { lo };

    // columns
    let n_col = ((area / 45.0).round() as usize).max(1);
    for _ in 0..n_col {
        let s = rand_in(&mut rng, 0.6, 1.0);
        let x = rand_in(&mut rng, margin, lx - margin - s);
        let y = rand_in(&mut rng, margin, ly - margin - s);
        w.fill_box(Vec3::new(x, y, 0.0), Vec3::new(x + s, y + s, lz), true);
    }
    // tanks standing on the floor
    let n_tank = ((area / 300.0).round() as usize).max(1);
    for _ in 0..n_tank {
        let sx = rand_in(&mut rng, 2.0, 4.0_f64.min(lx / 3.0));
        let sy = rand_in(&mut rng, 2.0, 4.0_f64.min(ly / 3.0));
        let x = rand_in(&mut rng, margin, lx - margin - sx);
        let y = rand_in(&mut rng, margin, ly - margin - sy);
        let hgt = rand_in(&mut rng, lz * 0.15, lz * 0.45);
        w.fill_box(Vec3::new(x, y, 0.0), Vec3::new(x + sx, y + sy, hgt), true);
    }
    // elevated platforms
    let n_plat = ((area / 80.0).round() as usize).max(1);
    for _ in 0..n_plat {
        let sx = rand_in(&mut rng, 3.0, 7.0_f64.min(lx / 2.0));
        let sy = rand_in(&mut rng, 3.0, 7.0_f64.min(ly / 2.0));
        let x = rand_in(&mut rng, 0.0, lx - sx);
        let y = rand_in(&mut rng, 0.0, ly - sy);
        let z = rand_in(&mut rng, 2.2, lz - 1.5);
        w.fill_box(Vec3::new(x, y, z), Vec3::new(x + sx, y + sy, z + 0.4), true);
    }
    // walkways spanning the hall, biased to the upper half
    let n_walk = ((lz / 4.0).round() as usize).max(1);
    for k in 0..n_walk {
        let z = rand_in(&mut rng, lz * 0.5, lz - 1.5);
        let width = 1.2;
        if k % 2 == 0 {
            let y = rand_in(&mut rng, margin, ly - margin - width);
            w.fill_box(Vec3::new(0.0, y, z), Vec3::new(lx, y + width, z + 0.3), true);
        } else {
            let x = rand_in(&mut rng, margin, lx - margin - width);
            w.fill_box(Vec3::new(x, 0.0, z), Vec3::new(x + width, ly, z + 0.3), true);
        }
    }

    // spawn: first voxel near the low corner at 1.5 m with a metre of clearance
    let z = 1.5_f64.min(lz / 2.0);
    let mut spawn = None;
    let step = resolution.max(0.1);
    'search: for ring in 0..((lx.max(ly) / step) as usize) {
        let r = margin + ring as f64 * step;
        for i in 0..=ring {
            for (x, y) in [(r, margin + i as f64 * step), (margin + i as f64 * step, r)] {
                if x >= lx - resolution || y >= ly - resolution {
                    continue;
                }
                let v = w.voxel_at(&Vec3::new(x, y, z));
                if !w.is_occupied(v) && w.clearance(v, 1.0) >= 1.0 {
                    spawn = Some(w.center(v));
                    break 'search;
                }
            }
        }
    }
    let spawn = spawn.ok_or_else(|| SimError::InvalidWorld("no free spawn location".into()))?;
    w.spawn = Pose { position: spawn, yaw: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI) };
    w.validate()?;
    w.seal_unreachable();
    Ok(w)
}

/// Occupied voxels with centre above half the world height, as a fraction.
pub fn upper_half_fraction(w: &WorldModel) -> f64 {
    let half = w.dims()[2] as f64 * w.resolution / 2.0;
    let mut up = 0usize;
    let mut all = 0usize;
    for (i, &o) in w.occupied_mask().iter().enumerate() {
        if o {
            all += 1;
            let v: Voxel = w.voxel_of_index(i);
            if w.center(v).z > half {
                up += 1;
            }
        }
    }
    up as f64 / all.max(1) as f64
}
