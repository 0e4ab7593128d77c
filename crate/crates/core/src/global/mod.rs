//! Omission-aware cost matrix and frontier visit order.

pub mod tsp;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{Frontier, PathMetric};

pub use tsp::{path_cost, solve_order, Tour, EXACT_LIMIT};

#[derive(Debug, Error, PartialEq)]
pub enum GlobalError {
    #[error("no live frontiers")]
    NoFrontiers,
    #[error("frontier {0} is not in the matrix")]
    UnknownId(u64),
    #[error("invalid omission parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OmissionParams {
    /// Base omission weight on frontier-to-frontier edges.
    pub alpha_f: f64,
    /// Base omission weight on edges leaving the vehicle.
    pub alpha_p: f64,
    /// Duration weight (s).
    pub omega_i: f64,
    /// Nearby-count weight.
    pub n_t: f64,
    /// Duration gate (s).
    pub t_max: f64,
    /// Nearby-count gate.
    pub n_max: usize,
    /// Neighbourhood radius (m).
    pub s_near: f64,
    pub v_max: f64,
    /// Largest number of frontiers in the compressed problem.
    pub x_near: usize,
    /// Fewest frontiers handed to the solver when that many exist.
    pub n_min_tsp: usize,
    /// Cell count at which the omission weight saturates.
    pub n_ref: usize,
}

impl Default for OmissionParams {
    fn default() -> Self {
        OmissionParams {
            alpha_f: 1.0,
            alpha_p: 1.0,
            omega_i: 1.0,
            n_t: 1.0,
            t_max: 30.0,
            n_max: 5,
            s_near: 8.0,
            v_max: 2.0,
            x_near: 10,
            n_min_tsp: 4,
            n_ref: 40,
        }
    }
}

impl OmissionParams {
    pub fn validate(&self) -> Result<(), GlobalError> {
        let pos = [self.alpha_f, self.alpha_p, self.omega_i, self.n_t, self.t_max, self.s_near, self.v_max];
        if pos.iter().any(|x| !(*x > 0.0 && x.is_finite())) || self.n_max == 0 || self.n_ref == 0 {
            return Err(GlobalError::InvalidParams("weights, gates and speeds must be positive".into()));
        }
        if self.n_min_tsp < 3 {
            return Err(GlobalError::InvalidParams("n_min_tsp must be at least 3".into()));
        }
        if self.x_near < self.n_min_tsp {
            return Err(GlobalError::InvalidParams("x_near must be at least n_min_tsp".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRole {
    FrontierEdge,
    PoseEdge,
}

/// Omission penalty from the raw terms: cell count, age (s) and nearby count.
pub fn penalty_from_terms(cells: usize, duration: f64, near: usize, p: &OmissionParams, role: EdgeRole) -> f64 {
    let alpha0 = match role {
        EdgeRole::FrontierEdge => p.alpha_f,
        EdgeRole::PoseEdge => p.alpha_p,
    };
    let alpha = alpha0 * (cells as f64 / p.n_ref as f64).min(1.0);
    let omega = if duration > 0.0 && duration < p.t_max { p.omega_i } else { 0.0 };
    let beta = if near > 0 && near < p.n_max { p.n_t } else { 0.0 };
    alpha * omega * beta
}

pub fn omission_penalty(f: &Frontier, now: f64, p: &OmissionParams, role: EdgeRole) -> f64 {
    penalty_from_terms(f.cells.len(), f.duration(now), f.near_count, p, role)
}

/// Travel time between frontiers plus the penalty of the source frontier.
pub fn frontier_cost<M: PathMetric>(a: &Frontier, b: &Frontier, now: f64, metric: &mut M, p: &OmissionParams) -> f64 {
    metric.between(a, b) / p.v_max + omission_penalty(a, now, p, EdgeRole::FrontierEdge)
}

/// Travel time from the vehicle plus the penalty of the target frontier.
pub fn position_cost<M: PathMetric>(b: &Frontier, now: f64, metric: &mut M, p: &OmissionParams) -> f64 {
    metric.from_pose(b) / p.v_max + omission_penalty(b, now, p, EdgeRole::PoseEdge)
}

/// Frontiers within `s_near` of the vehicle, closest first, at most `x_near`;
/// topped up with the next closest to `n_min_tsp` when too few qualify.
pub fn near_current_ids<M: PathMetric>(
    frontiers: &[&Frontier],
    metric: &mut M,
    p: &OmissionParams,
) -> Result<Vec<u64>, GlobalError> {
    if frontiers.is_empty() {
        return Err(GlobalError::NoFrontiers);
    }
    let mut d: Vec<(f64, u64)> = frontiers.iter().map(|f| (metric.from_pose(f), f.id)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near = d.iter().filter(|x| x.0 < p.s_near).count().min(p.x_near);
    let n = near.max(p.n_min_tsp.min(d.len()));
    Ok(d[..n].iter().map(|x| x.1).collect())
}

/// Row and column 0 stand for the vehicle; node `i >= 1` is `id_map[i - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub entries: Vec<Vec<f64>>,
    pub id_map: Vec<u64>,
}

impl CostMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.id_map.iter().position(|x| *x == id).map(|i| i + 1)
    }

    /// Directed costs from frontier `id` to every other frontier in the matrix.
    pub fn outgoing(&self, id: u64) -> std::collections::BTreeMap<u64, f64> {
        let Some(i) = self.index_of(id) else { return Default::default() };
        self.id_map
            .iter()
            .enumerate()
            .filter(|(_, &j)| j != id)
            .map(|(k, &j)| (j, self.entries[i][k + 1]))
            .collect()
    }

    /// Frontier block made symmetric by the larger directed entry; row 0
    /// kept, column 0 zero.
    pub fn symmetrized(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        let mut s = self.entries.clone();
        for i in 1..n {
            for j in 1..n {
                s[i][j] = self.entries[i][j].max(self.entries[j][i]);
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        out.push_str(",uav");
        for id in &self.id_map {
            out.push_str(&format!(",f{id}"));
        }
        out.push('\n');
        for (i, row) in self.entries.iter().enumerate() {
            if i == 0 {
                out.push_str("uav");
            } else {
                out.push_str(&format!("f{}", self.id_map[i - 1]));
            }
            for x in row {
                out.push_str(&format!(",{x:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn build_cost_matrix<M: PathMetric>(
    frontiers: &[&Frontier],
    now: f64,
    metric: &mut M,
    p: &OmissionParams,
) -> CostMatrix {
    let n = frontiers.len();
    let mut e = vec![vec![0.0; n + 1]; n + 1];
    for (j, f) in frontiers.iter().enumerate() {
        e[0][j + 1] = position_cost(f, now, metric, p);
    }
    for (i, a) in frontiers.iter().enumerate() {
        for (j, b) in frontiers.iter().enumerate() {
            e[i + 1][j + 1] = frontier_cost(a, b, now, metric, p);
        }
    }
    CostMatrix { entries: e, id_map: frontiers.iter().map(|f| f.id).collect() }
}

/// Sub-matrix over `ids`, in the given order.
pub fn compress_matrix(m: &CostMatrix, ids: &[u64]) -> Result<CostMatrix, GlobalError> {
    let idx: Vec<usize> = ids.iter().map(|id| m.index_of(*id).ok_or(GlobalError::UnknownId(*id))).collect::<Result<_, _>>()?;
    let src: Vec<usize> = std::iter::once(0).chain(idx).collect();
    let entries = src.iter().map(|&i| src.iter().map(|&j| m.entries[i][j]).collect()).collect();
    Ok(CostMatrix { entries, id_map: ids.to_vec() })
}

pub fn solve_tsp(m: &CostMatrix) -> Tour {
    let s = m.symmetrized();
    let nodes = solve_order(&s);
    let cost = path_cost(&s, &nodes);
    let ids = nodes[1..].iter().map(|&i| m.id_map[i - 1]).collect();
    Tour { nodes, ids, cost }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPlan {
    pub near_ids: Vec<u64>,
    pub matrix: CostMatrix,
    pub tour: Tour,
}

impl GlobalPlan {
    /// Frontier ids in visiting order.
    pub fn order(&self) -> &[u64] {
        &self.tour.ids
    }
}

/// Selects the neighbourhood, builds its cost matrix directly (equivalent to
/// compressing the full matrix) and solves it.
pub fn plan_global<M: PathMetric>(
    frontiers: &[&Frontier],
    now: f64,
    metric: &mut M,
    p: &OmissionParams,
) -> Result<GlobalPlan, GlobalError> {
    let near_ids = near_current_ids(frontiers, metric, p)?;
    let subset: Vec<&Frontier> =
        near_ids.iter().map(|id| *frontiers.iter().find(|f| f.id == *id).unwrap()).collect();
    let matrix = build_cost_matrix(&subset, now, metric, p);
    let tour = solve_tsp(&matrix);
    Ok(GlobalPlan { near_ids, matrix, tour })
}

/// Full uncompressed problem over every frontier.
pub fn plan_global_full<M: PathMetric>(
    frontiers: &[&Frontier],
    now: f64,
    metric: &mut M,
    p: &OmissionParams,
) -> Result<GlobalPlan, GlobalError> {
    if frontiers.is_empty() {
        return Err(GlobalError::NoFrontiers);
    }
    let matrix = build_cost_matrix(frontiers, now, metric, p);
    let tour = solve_tsp(&matrix);
    Ok(GlobalPlan { near_ids: matrix.id_map.clone(), matrix, tour })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontier::EuclideanMetric;
    use crate::geom::Vec3;
    use crate::voxel::{Voxel, VoxelMap};

    fn frontier(id: u64, p: Vec3, cells: usize, birth: f64, near: usize) -> Frontier {
        let m = VoxelMap::new(Vec3::zeros(), [4, 4, 4], 0.1, 1.0).unwrap();
        let cells: Vec<Voxel> = (0..cells as i32).map(|i| Voxel::new(i, 0, 0)).collect();
        let mut f = Frontier::new(id, cells, 0, birth, &m.full_view());
        f.avg_position = p;
        f.near_count = near;
        f
    }

    #[test]
    fn gates_close_at_limits() {
        let p = OmissionParams::default();
        for role in [EdgeRole::FrontierEdge, EdgeRole::PoseEdge] {
            assert_eq!(penalty_from_terms(40, p.t_max, 1, &p, role), 0.0);
            assert_eq!(penalty_from_terms(40, p.t_max + 5.0, 1, &p, role), 0.0);
            assert_eq!(penalty_from_terms(40, 10.0, p.n_max, &p, role), 0.0);
            assert_eq!(penalty_from_terms(40, 10.0, p.n_max + 3, &p, role), 0.0);
            assert!(penalty_from_terms(40, 10.0, 1, &p, role) > 0.0);
        }
    }

    #[test]
    fn interior_penalty_is_the_product() {
        let p = OmissionParams { alpha_f: 0.7, omega_i: 1.5, n_t: 2.0, n_max: 4, ..Default::default() };
        let got = penalty_from_terms(p.n_ref, p.t_max / 2.0, 1, &p, EdgeRole::FrontierEdge);
        assert_eq!(got, 0.7 * 1.5 * 2.0);
    }

    #[test]
    fn validation() {
        assert!(OmissionParams::default().validate().is_ok());
        assert!(OmissionParams { n_min_tsp: 2, ..Default::default() }.validate().is_err());
        assert!(OmissionParams { x_near: 3, ..Default::default() }.validate().is_err());
        assert!(OmissionParams { v_max: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn travel_time_only_when_gates_closed() {
        let p = OmissionParams::default();
        let a = frontier(1, Vec3::new(0.0, 0.0, 1.0), 10, 0.0, 0);
        let b = frontier(2, Vec3::new(4.0, 0.0, 1.0), 10, 0.0, 0);
        let mut m = EuclideanMetric { uav: Vec3::zeros() };
        assert_eq!(frontier_cost(&a, &b, 5.0, &mut m, &p), 2.0);
        assert_eq!(frontier_cost(&a, &a, 5.0, &mut m, &p), 0.0);
    }

    #[test]
    fn near_ids_padding_and_cap() {
        let p = OmissionParams::default();
        let fs: Vec<Frontier> = vec![
            frontier(1, Vec3::new(1.0, 0.0, 0.0), 1, 0.0, 0),
            frontier(2, Vec3::new(2.0, 0.0, 0.0), 1, 0.0, 0),
            frontier(3, Vec3::new(20.0, 0.0, 0.0), 1, 0.0, 0),
            frontier(4, Vec3::new(30.0, 0.0, 0.0), 1, 0.0, 0),
            frontier(5, Vec3::new(40.0, 0.0, 0.0), 1, 0.0, 0),
        ];
        let refs: Vec<&Frontier> = fs.iter().collect();
        let mut m = EuclideanMetric { uav: Vec3::zeros() };
        assert_eq!(near_current_ids(&refs, &mut m, &p).unwrap(), vec![1, 2, 3, 4]);
        let many: Vec<Frontier> =
            (1..=50).map(|i| frontier(i, Vec3::new(7.9 - i as f64 * 0.1, 0.0, 0.0), 1, 0.0, 0)).collect();
        let refs: Vec<&Frontier> = many.iter().collect();
        let got = near_current_ids(&refs, &mut m, &p).unwrap();
        assert_eq!(got, (41..=50).rev().collect::<Vec<u64>>());
        assert_eq!(near_current_ids(&[], &mut m, &p), Err(GlobalError::NoFrontiers));
    }

    #[test]
    fn outgoing_reads_the_frontier_row() {
        let c = CostMatrix {
            entries: vec![vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 4.0, 5.0], vec![0.0, 6.0, 0.0, 7.0], vec![0.0, 8.0, 9.0, 0.0]],
            id_map: vec![10, 20, 30],
        };
        let o = c.outgoing(20);
        assert_eq!(o.into_iter().collect::<Vec<_>>(), vec![(10, 6.0), (30, 7.0)]);
        assert!(c.outgoing(99).is_empty());
    }

    #[test]
    fn matrix_shape_and_compression() {
        let p = OmissionParams::default();
        let f1 = frontier(7, Vec3::new(3.0, 4.0, 0.0), 12, 0.0, 2);
        let mut m = EuclideanMetric { uav: Vec3::zeros() };
        let c = build_cost_matrix(&[&f1], 10.0, &mut m, &p);
        assert_eq!(c.size(), 2);
        assert_eq!(c.entries[1][0], 0.0);
        assert_eq!(c.entries[0][1], position_cost(&f1, 10.0, &mut m, &p));
        let fs: Vec<Frontier> = (1..=6)
            .map(|i| frontier(i, Vec3::new(i as f64, (i * i) as f64 * 0.3, 0.0), i as usize * 5, 0.0, 1))
            .collect();
        let refs: Vec<&Frontier> = fs.iter().collect();
        let full = build_cost_matrix(&refs, 3.0, &mut m, &p);
        assert_eq!(compress_matrix(&full, &full.id_map.clone()).unwrap(), full);
        let sub = compress_matrix(&full, &[5, 2]).unwrap();
        assert_eq!(sub.entries[1][2], full.entries[5][2]);
        assert_eq!(sub.entries[0][1], full.entries[0][5]);
        assert_eq!(compress_matrix(&full, &[99]), Err(GlobalError::UnknownId(99)));
    }

    #[test]
    fn plan_examples() {
        let p = OmissionParams::default();
        let mut m = EuclideanMetric { uav: Vec3::zeros() };
        let a = frontier(1, Vec3::new(1.0, 0.0, 0.0), 5, 0.0, 0);
        assert_eq!(plan_global(&[&a], 1.0, &mut m, &p).unwrap().order(), &[1]);
        let far = frontier(2, Vec3::new(-10.0, 0.0, 0.0), 5, 0.0, 0);
        assert_eq!(plan_global(&[&far, &a], 1.0, &mut m, &p).unwrap().order(), &[1, 2]);
        // equidistant: the old frontier carries no penalty and goes first
        let young = frontier(3, Vec3::new(0.0, 5.0, 0.0), 40, 20.0, 2);
        let old = frontier(4, Vec3::new(0.0, -5.0, 0.0), 40, 0.0, 2);
        assert_eq!(plan_global(&[&young, &old], 40.0, &mut m, &p).unwrap().order(), &[4, 3]);
    }
}
