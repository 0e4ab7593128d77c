//! Layered viewpoint graph and its shortest path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{LocalError, ViewpointCandidate};
use crate::geom::{yaw_distance, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct LocalNode {
    pub layer: usize,
    /// `None` for the vehicle node.
    pub frontier: Option<u64>,
    pub candidate: Option<ViewpointCandidate>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LocalGraph {
    pub nodes: Vec<LocalNode>,
    pub edges: Vec<LocalEdge>,
    pub layers: usize,
}

impl LocalGraph {
    /// Kahn's algorithm; `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            indeg[e.to] += 1;
        }
        let mut ready: Vec<usize> = (0..self.nodes.len()).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::new();
        while let Some(i) = ready.pop() {
            out.push(i);
            for e in self.edges.iter().filter(|e| e.from == i) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    ready.push(e.to);
                }
            }
        }
        (out.len() == self.nodes.len()).then_some(out)
    }
}

/// Layer 0 is the vehicle; layer `t` holds the candidates of the `t`-th
/// frontier. Edges join consecutive layers only, weighted by travel time
/// plus turning time. Candidates of layer 1 must carry their vehicle-relative
/// costs; later edges use `path_dist`. Stops at `depth` frontier layers or
/// at the first frontier without candidates.
pub fn build_viewpoint_dag<F>(
    layers: &[(u64, Vec<ViewpointCandidate>)],
    depth: usize,
    v_max: f64,
    yaw_rate_max: f64,
    mut path_dist: F,
) -> Result<LocalGraph, LocalError>
where
    F: FnMut(&Vec3, &Vec3) -> f64,
{
    if layers.first().map_or(true, |l| l.1.is_empty()) {
        return Err(LocalError::NoViewpoints);
    }
    let mut g = LocalGraph {
        nodes: vec![LocalNode { layer: 0, frontier: None, candidate: None }],
        edges: Vec::new(),
        layers: 1,
    };
    let mut prev: Vec<usize> = vec![0];
    for (t, (fid, cands)) in layers.iter().take(depth).enumerate() {
        if cands.is_empty() {
            break;
        }
        let mut cur = Vec::new();
        for c in cands {
            let j = g.nodes.len();
            g.nodes.push(LocalNode { layer: t + 1, frontier: Some(*fid), candidate: Some(c.clone()) });
            cur.push(j);
            for &i in &prev {
                let weight = match &g.nodes[i].candidate {
                    None => c.cost_dist / v_max + c.cost_yaw / yaw_rate_max,
                    Some(a) => {
                        path_dist(&a.position, &c.position) / v_max + yaw_distance(a.yaw, c.yaw) / yaw_rate_max
                    }
                };
                g.edges.push(LocalEdge { from: i, to: j, weight });
            }
        }
        g.layers = t + 2;
        prev = cur;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalPath {
    pub nodes: Vec<usize>,
    pub cost: f64,
    /// The chosen viewpoint of the first frontier.
    pub first: ViewpointCandidate,
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Dijkstra from node 0 to the cheapest node of the last layer.
pub fn shortest_local_path(g: &LocalGraph) -> Result<LocalPath, LocalError> {
    let n = g.nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.from].push((e.to, e.weight));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(Item(0.0, 0));
    while let Some(Item(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        for &(j, w) in &adj[i] {
            let nd = d + w;
            if nd < dist[j] {
                dist[j] = nd;
                parent[j] = i;
                heap.push(Item(nd, j));
            }
        }
    }
    let last = g.layers.saturating_sub(1);
    let end = (0..n)
        .filter(|&i| g.nodes[i].layer == last && last > 0 && dist[i].is_finite())
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
        .ok_or(LocalError::Disconnected)?;
    let mut nodes = vec![end];
    while parent[*nodes.last().unwrap()] != usize::MAX {
        nodes.push(parent[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let first = g.nodes[nodes[1]].candidate.clone().ok_or(LocalError::Disconnected)?;
    Ok(LocalPath { nodes, cost: dist[end], first })
}
