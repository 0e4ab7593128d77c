//! Open-path TSP from node 0: exact Held-Karp for small instances, nearest
//! neighbour improved by 2-opt and Or-opt otherwise.

use serde::{Deserialize, Serialize};

/// Largest frontier count solved exactly.
pub const EXACT_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    /// Matrix indices, starting with 0.
    pub nodes: Vec<usize>,
    /// Frontier ids of `nodes[1..]`.
    pub ids: Vec<u64>,
    pub cost: f64,
}

/// Cost of visiting `order` (which starts at 0) without returning.
pub fn path_cost(m: &[Vec<f64>], order: &[usize]) -> f64 {
    order.windows(2).map(|w| m[w[0]][w[1]]).sum()
}

/// Exact open path from node 0 through every node.
pub fn held_karp(m: &[Vec<f64>]) -> Vec<usize> {
    let n = m.len() - 1;
    if n == 0 {
        return vec![0];
    }
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full * n];
    let mut parent = vec![u8::MAX; full * n];
    for j in 0..n {
        dp[(1 << j) * n + j] = m[0][j + 1];
    }
    for s in 1..full {
        for j in 0..n {
            if s & (1 << j) == 0 {
                continue;
            }
            let cur = dp[s * n + j];
            if !cur.is_finite() {
                continue;
            }
            for k in 0..n {
                if s & (1 << k) != 0 {
                    continue;
                }
                let t = s | (1 << k);
                let c = cur + m[j + 1][k + 1];
                if c < dp[t * n + k] {
                    dp[t * n + k] = c;
                    parent[t * n + k] = j as u8;
                }
            }
        }
    }
    let s = full - 1;
    let mut end = 0;
    for j in 1..n {
        if dp[s * n + j] < dp[s * n + end] {
            end = j;
        }
    }
    let mut order = Vec::with_capacity(n + 1);
    let (mut s, mut j) = (s, end);
    loop {
        order.push(j + 1);
        let p = parent[s * n + j];
        s &= !(1 << j);
        if p == u8::MAX {
            break;
        }
        j = p as usize;
    }
    order.push(0);
    order.reverse();
    order
}

/// Greedy nearest-neighbour path from node 0 (ties to the lower index).
pub fn nearest_neighbour(m: &[Vec<f64>]) -> Vec<usize> {
    let n = m.len();
    let mut used = vec![false; n];
    used[0] = true;
    let mut order = vec![0];
    for _ in 1..n {
        let cur = *order.last().unwrap();
        let next = (1..n).filter(|&j| !used[j]).min_by(|&a, &b| m[cur][a].total_cmp(&m[cur][b])).unwrap();
        used[next] = true;
        order.push(next);
    }
    order
}

/// 2-opt on an open path with a fixed start: reverses `order[i..=j]` while
/// that lowers the cost. The reversed block may run to the end of the path.
/// Assumes the entries between frontier nodes are symmetric.
pub fn two_opt(m: &[Vec<f64>], order: &mut [usize]) {
    let n = order.len();
    if n < 3 {
        return;
    }
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let a = order[i - 1];
                let b = order[i];
                let c = order[j];
                let before = m[a][b] + if j + 1 < n { m[c][order[j + 1]] } else { 0.0 };
                let after = m[a][c] + if j + 1 < n { m[b][order[j + 1]] } else { 0.0 };
                if after < before - 1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
}

/// Or-opt: moves a block of up to three nodes, possibly reversed, to the
/// position that first lowers the cost. Returns whether anything moved.
pub fn or_opt(m: &[Vec<f64>], order: &mut Vec<usize>) -> bool {
    let n = order.len();
    let mut any = false;
    let mut improved = true;
    while improved {
        improved = false;
        'outer: for len in 1..=3usize {
            for i in 1..n {
                if i + len > n {
                    break;
                }
                let prev = order[i - 1];
                let next = order.get(i + len).copied();
                let (first, last) = (order[i], order[i + len - 1]);
                let inner = |b: &[usize]| b.windows(2).map(|w| m[w[0]][w[1]]).sum::<f64>();
                let fwd = inner(&order[i..i + len]);
                let removed = m[prev][first] + next.map_or(0.0, |x| m[last][x] - m[prev][x]);
                let mut rest: Vec<usize> = order[..i].to_vec();
                rest.extend_from_slice(&order[i + len..]);
                for rev in [false, true] {
                    let mut block = order[i..i + len].to_vec();
                    if rev {
                        block.reverse();
                    }
                    let (bf, bl) = (block[0], block[len - 1]);
                    let change = inner(&block) - fwd - removed;
                    for k in 1..=rest.len() {
                        let a = rest[k - 1];
                        let added = m[a][bf] + rest.get(k).map_or(0.0, |&b| m[bl][b] - m[a][b]);
                        if change + added < -1e-12 {
                            let mut trial = rest[..k].to_vec();
                            trial.extend_from_slice(&block);
                            trial.extend_from_slice(&rest[k..]);
                            *order = trial;
                            improved = true;
                            any = true;
                            continue 'outer;
                        }
                    }
                }
            }
        }
    }
    any
}

/// Heuristic open path: nearest neighbour, then 2-opt and Or-opt in turn
/// until neither improves.
pub fn heuristic(m: &[Vec<f64>]) -> Vec<usize> {
    let mut order = nearest_neighbour(m);
    two_opt(m, &mut order);
    while or_opt(m, &mut order) {
        two_opt(m, &mut order);
    }
    order
}

/// Solves the open path over the (already symmetrized) matrix.
pub fn solve_order(m: &[Vec<f64>]) -> Vec<usize> {
    let n = m.len() - 1;
    if n <= EXACT_LIMIT {
        held_karp(m)
    } else {
        heuristic(m)
    }
}
