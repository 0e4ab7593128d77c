//! Grouping frontier cells into frontiers.

use std::collections::HashMap;

use crate::voxel::{neighbor_offsets_26, Voxel};

/// 26-connected components, each then bisected at the median of its longest
/// axis while that axis spans more than `split_threshold` metres. Clusters
/// come back sorted internally and ordered by their smallest cell.
pub fn cluster_cells(cells: &[Voxel], resolution: f64, split_threshold: f64) -> Vec<Vec<Voxel>> {
    let mut out = Vec::new();
    for comp in components(cells) {
        split(comp, resolution, split_threshold, &mut out);
    }
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort_by(|a, b| a[0].cmp(&b[0]));
    out
}

fn components(cells: &[Voxel]) -> Vec<Vec<Voxel>> {
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let index: HashMap<Voxel, usize> = sorted.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let offsets: Vec<[i32; 3]> = neighbor_offsets_26().collect();
    let mut label = vec![usize::MAX; sorted.len()];
    let mut out = Vec::new();
    for s in 0..sorted.len() {
        if label[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        label[s] = id;
        let mut comp = vec![sorted[s]];
        let mut head = 0;
        while head < comp.len() {
            let v = comp[head];
            head += 1;
            for o in &offsets {
                if let Some(&j) = index.get(&v.offset(*o)) {
                    if label[j] == usize::MAX {
                        label[j] = id;
                        comp.push(sorted[j]);
                    }
                }
            }
        }
        out.push(comp);
    }
    out
}

fn split(mut comp: Vec<Voxel>, res: f64, threshold: f64, out: &mut Vec<Vec<Voxel>>) {
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    for v in &comp {
        for a in 0..3 {
            lo[a] = lo[a].min(v.axis(a));
            hi[a] = hi[a].max(v.axis(a));
        }
    }
    let axis = (0..3).max_by_key(|&a| (hi[a] - lo[a], -(a as i32))).unwrap();
    let edge = (hi[axis] - lo[axis] + 1) as f64 * res;
    if edge <= threshold + 1e-9 || hi[axis] == lo[axis] {
        out.push(comp);
        return;
    }
    comp.sort_unstable_by_key(|v| (v.axis(axis), *v));
    let median = comp[comp.len() / 2].axis(axis);
    let cut = if median > lo[axis] { median } else { median + 1 };
    let (left, right): (Vec<Voxel>, Vec<Voxel>) = comp.into_iter().partition(|v| v.axis(axis) < cut);
    for half in [left, right] {
        for c in components(&half) {
            split(c, res, threshold, out);
        }
    }
}
