//! 26-connected grid searches: A* between two voxels and a single-source
//! distance field.
//!
//! Path lengths are kept as step counts per step kind (axis, face diagonal,
//! space diagonal) and converted to metres with one fixed formula, so two
//! searches that find paths of the same composition report bit-identical
//! distances.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::geom::Vec3;
use crate::voxel::{LayerView, Voxel, VoxelState};

const SQRT2: f64 = std::f64::consts::SQRT_2;
const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path endpoint is occupied")]
    EndpointOccupied,
    #[error("path endpoint is outside the view")]
    OutsideView,
}

/// Result of a bounded search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchOutcome {
    Found(f64),
    /// No free path exists.
    Unreachable,
    /// The distance exceeds the given bound.
    Beyond(f64),
    /// Expansion budget ran out; the distance is at least the value given.
    Exhausted(f64),
}

impl SearchOutcome {
    pub fn found(self) -> Option<f64> {
        match self {
            SearchOutcome::Found(d) => Some(d),
            _ => None,
        }
    }
}

/// One of the 26 moves with its kind (0 axis, 1 face diagonal, 2 space diagonal).
#[derive(Clone, Copy)]
struct Move {
    d: [i32; 3],
    kind: usize,
}

fn moves() -> &'static [Move; 26] {
    static MOVES: std::sync::OnceLock<[Move; 26]> = std::sync::OnceLock::new();
    MOVES.get_or_init(|| {
        let mut out = [Move { d: [0; 3], kind: 0 }; 26];
        let mut n = 0;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let nz = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
                    if nz == 0 {
                        continue;
                    }
                    out[n] = Move { d: [dx, dy, dz], kind: nz - 1 };
                    n += 1;
                }
            }
        }
        out
    })
}

/// Linear index offsets of the moves for a map with `dims`.
fn move_offsets(dims: [usize; 3]) -> [isize; 26] {
    let (nx, nxy) = (dims[0] as isize, (dims[0] * dims[1]) as isize);
    let mut out = [0isize; 26];
    for (o, m) in out.iter_mut().zip(moves().iter()) {
        *o = m.d[0] as isize + nx * m.d[1] as isize + nxy * m.d[2] as isize;
    }
    out
}

#[inline]
pub(crate) fn steps_length(c: [u32; 3], res: f64) -> f64 {
    (c[0] as f64 + c[1] as f64 * SQRT2 + c[2] as f64 * SQRT3) * res
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    f: f64,
    g: f64,
    idx: u32,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    // max-heap: smallest f first, then larger g, then smaller index
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then(self.g.total_cmp(&o.g)).then(o.idx.cmp(&self.idx))
    }
}

/// Reusable per-voxel search state, reset in O(1) by bumping a generation.
#[derive(Default)]
struct Scratch {
    stamp: Vec<u32>,
    closed: Vec<u32>,
    gen: u32,
    counts: Vec<[u32; 3]>,
    parent: Vec<u32>,
    heap: BinaryHeap<Entry>,
}

impl Scratch {
    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.closed = vec![0; n];
            self.counts = vec![[0; 3]; n];
            self.parent = vec![u32::MAX; n];
            self.gen = 0;
        }
        self.gen = self.gen.wrapping_add(1);
        if self.gen == 0 {
            self.stamp.fill(0);
            self.closed.fill(0);
            self.gen = 1;
        }
        self.heap.clear();
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Parameters of one A* query.
#[derive(Clone, Copy, Debug)]
pub struct AstarQuery {
    /// Give up once the distance provably exceeds this.
    pub bound: f64,
    pub max_expansions: usize,
    /// Forbid diagonal moves unless every voxel of the spanned box is passable.
    pub no_corner_cutting: bool,
}

impl Default for AstarQuery {
    fn default() -> Self {
        AstarQuery { bound: f64::INFINITY, max_expansions: usize::MAX, no_corner_cutting: false }
    }
}

/// A* from `start` to `goal` over voxels accepted by `passable`. The start
/// and goal voxels are exempt from the predicate. Returns the outcome and,
/// when found and requested, the voxel path including both ends.
pub fn astar<P>(
    view: &LayerView,
    start: Voxel,
    goal: Voxel,
    passable: P,
    q: &AstarQuery,
    want_path: bool,
) -> (SearchOutcome, Option<Vec<Voxel>>)
where
    P: Fn(Voxel) -> bool,
{
    let map = view.map();
    let res = map.resolution();
    if !view.contains(start) || !view.contains(goal) {
        return (SearchOutcome::Unreachable, None);
    }
    if start == goal {
        return (SearchOutcome::Found(0.0), want_path.then(|| vec![start]));
    }
    // shrunk slightly so rounding never makes the heuristic inconsistent
    let h = |v: Voxel| ((v.squared_distance(goal) as f64).sqrt() * res) * (1.0 - 1e-12);
    SCRATCH.with(|cell| {
        let mut s = cell.borrow_mut();
        s.reset(map.len());
        let gen = s.gen;
        let si = map.index(start).unwrap();
        let gi = map.index(goal).unwrap();
        s.stamp[si] = gen;
        s.counts[si] = [0; 3];
        s.parent[si] = u32::MAX;
        s.heap.push(Entry { f: h(start), g: 0.0, idx: si as u32 });
        let mut expansions = 0usize;
        let mut last_f;
        while let Some(e) = s.heap.pop() {
            let i = e.idx as usize;
            if s.closed[i] == gen {
                continue;
            }
            let g = steps_length(s.counts[i], res);
            if e.g > g {
                continue;
            }
            if e.f > q.bound {
                return (SearchOutcome::Beyond(e.f), None);
            }
            last_f = e.f;
            s.closed[i] = gen;
            if i == gi {
                let path = want_path.then(|| {
                    let mut p = vec![map.voxel_of_index(i)];
                    let mut j = s.parent[i];
                    while j != u32::MAX {
                        p.push(map.voxel_of_index(j as usize));
                        j = s.parent[j as usize];
                    }
                    p.reverse();
                    p
                });
                return (SearchOutcome::Found(g), path);
            }
            expansions += 1;
            if expansions > q.max_expansions {
                return (SearchOutcome::Exhausted(last_f), None);
            }
            let v = map.voxel_of_index(i);
            let c = s.counts[i];
            for m in moves() {
                let u = v.offset(m.d);
                if !view.contains(u) {
                    continue;
                }
                let j = map.index(u).unwrap();
                if s.closed[j] == gen {
                    continue;
                }
                if j != gi && !passable(u) {
                    continue;
                }
                if q.no_corner_cutting && m.kind > 0 && !corner_ok(v, m.d, &passable, view) {
                    continue;
                }
                let mut nc = c;
                nc[m.kind] += 1;
                let ng = steps_length(nc, res);
                if s.stamp[j] == gen && steps_length(s.counts[j], res) <= ng {
                    continue;
                }
                s.stamp[j] = gen;
                s.counts[j] = nc;
                s.parent[j] = i as u32;
                let f = ng + h(u);
                s.heap.push(Entry { f, g: ng, idx: j as u32 });
            }
        }
        (SearchOutcome::Unreachable, None)
    })
}

fn corner_ok<P: Fn(Voxel) -> bool>(v: Voxel, d: [i32; 3], passable: &P, view: &LayerView) -> bool {
    for mask in 1..7u8 {
        let o = [
            if mask & 1 != 0 { d[0] } else { 0 },
            if mask & 2 != 0 { d[1] } else { 0 },
            if mask & 4 != 0 { d[2] } else { 0 },
        ];
        if o == d || o == [0, 0, 0] {
            continue;
        }
        let u = v.offset(o);
        if !view.contains(u) || !passable(u) {
            return false;
        }
    }
    true
}

/// Free voxels of the view form the interior of distance paths.
pub fn free_in<'v>(view: &'v LayerView<'_>) -> impl Fn(Voxel) -> bool + 'v {
    move |v| view.state(v) == Some(VoxelState::Free)
}

/// Shortest 26-connected path length between two positions over free voxels
/// of `view`. Endpoints may be unknown but not occupied.
pub fn astar_distance(view: &LayerView, from: &Vec3, to: &Vec3) -> Result<Option<f64>, PathError> {
    bounded_distance(view, from, to, &AstarQuery::default()).map(|o| o.found())
}

pub fn bounded_distance(view: &LayerView, from: &Vec3, to: &Vec3, q: &AstarQuery) -> Result<SearchOutcome, PathError> {
    let map = view.map();
    let a = map.voxel_at(from);
    let b = map.voxel_at(to);
    for v in [a, b] {
        match view.state(v) {
            None => return Err(PathError::OutsideView),
            Some(VoxelState::Occupied) => return Err(PathError::EndpointOccupied),
            _ => {}
        }
    }
    Ok(astar(view, a, b, free_in(view), q, false).0)
}

/// Single-source distances over free voxels, grown until every target is
/// settled (plus a margin) or the radius is exceeded.
#[derive(Clone, Debug, Default)]
pub struct DistanceField {
    /// Generation at which a voxel was settled.
    settled: Vec<u32>,
    /// Generation at which a voxel was queued.
    queued: Vec<u32>,
    /// Generation at which a voxel was marked as a target.
    target: Vec<u32>,
    counts: Vec<[u32; 3]>,
    dist: Vec<f64>,
    gen: u32,
    pending: usize,
    heap: BinaryHeap<Entry>,
    source: Option<Voxel>,
    /// Distance of the last settled voxel.
    reach: f64,
    /// True when the whole connected component was settled.
    exhausted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldValue {
    Distance(f64),
    Unreachable,
    /// Not settled; the true distance is at least this.
    AtLeast(f64),
}

impl DistanceField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn source(&self) -> Option<Voxel> {
        self.source
    }

    /// Recomputes from `start`. Voxels in `targets` and the start are
    /// admitted even when not free.
    pub fn compute(&mut self, view: &LayerView, start: Voxel, targets: &[Voxel], radius: f64, margin: f64) {
        let map = view.map();
        let res = map.resolution();
        let n = map.len();
        if self.settled.len() != n {
            self.settled = vec![0; n];
            self.queued = vec![0; n];
            self.counts = vec![[0; 3]; n];
            self.dist = vec![0.0; n];
            self.target = vec![0; n];
            self.gen = 0;
        }
        self.gen = self.gen.wrapping_add(1);
        if self.gen == 0 {
            self.settled.fill(0);
            self.queued.fill(0);
            self.target.fill(0);
            self.gen = 1;
        }
        self.pending = 0;
        let gen = self.gen;
        self.source = Some(start);
        self.reach = 0.0;
        self.exhausted = false;
        let Some(si) = map.index(start).filter(|_| view.contains(start)) else {
            self.exhausted = true;
            return;
        };
        for t in targets {
            if let Some(j) = map.index(*t) {
                if self.target[j] != gen {
                    self.target[j] = gen;
                    self.pending += 1;
                }
            }
        }
        let states = map.states();
        let dims = map.dims();
        let offs = move_offsets(dims);
        let (k_lo, k_hi) = view.k_range();
        let mut pending = std::mem::take(&mut self.pending);
        let mut heap = std::mem::take(&mut self.heap);
        heap.clear();
        self.queued[si] = gen;
        self.counts[si] = [0; 3];
        self.dist[si] = 0.0;
        heap.push(Entry { f: 0.0, g: 0.0, idx: si as u32 });
        let mut stop_at = f64::INFINITY;
        let mut finished = true;
        while let Some(e) = heap.pop() {
            let i = e.idx as usize;
            if self.settled[i] == gen {
                continue;
            }
            if e.g > radius || e.g > stop_at {
                // every voxel still queued is at least this far
                self.reach = e.g;
                finished = false;
                break;
            }
            self.reach = e.g;
            self.settled[i] = gen;
            if pending > 0 && self.target[i] == gen {
                pending -= 1;
                if pending == 0 {
                    stop_at = e.g + margin;
                }
            }
            let v = map.voxel_of_index(i);
            let interior = v.x > 0
                && v.y > 0
                && v.z > k_lo
                && (v.x as usize) + 1 < dims[0]
                && (v.y as usize) + 1 < dims[1]
                && v.z + 1 < k_hi;
            let c = self.counts[i];
            for (m, off) in moves().iter().zip(offs.iter()) {
                let j = if interior {
                    (i as isize + off) as usize
                } else {
                    let u = v.offset(m.d);
                    if !view.contains(u) {
                        continue;
                    }
                    map.index_unchecked(u)
                };
                if self.settled[j] == gen {
                    continue;
                }
                if states[j] != VoxelState::Free && self.target[j] != gen {
                    continue;
                }
                let mut nc = c;
                nc[m.kind] += 1;
                let ng = steps_length(nc, res);
                if self.queued[j] == gen && self.dist[j] <= ng {
                    continue;
                }
                self.queued[j] = gen;
                self.counts[j] = nc;
                self.dist[j] = ng;
                heap.push(Entry { f: ng, g: ng, idx: j as u32 });
            }
        }
        self.heap = heap;
        if finished {
            self.exhausted = true;
        }
    }

    pub fn get(&self, view: &LayerView, v: Voxel) -> FieldValue {
        let Some(i) = view.map().index(v) else { return FieldValue::Unreachable };
        if self.source.is_some() && self.settled.get(i) == Some(&self.gen) {
            FieldValue::Distance(self.dist[i])
        } else if self.exhausted {
            FieldValue::Unreachable
        } else {
            FieldValue::AtLeast(self.reach)
        }
    }
}
