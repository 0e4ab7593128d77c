//! Frontier extraction, clustering and bookkeeping.

mod cluster;
pub mod search;
pub mod viewpoint;

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::local::ViewpointCandidate;
use crate::sim::SensorSpec;
use crate::voxel::{LayerView, Voxel, VoxelBox, VoxelState, FACE_OFFSETS};

pub use cluster::cluster_cells;
pub use search::{astar_distance, bounded_distance, AstarQuery, DistanceField, FieldValue, PathError, SearchOutcome};
pub use viewpoint::{cell_visible, sample_viewpoints, ViewpointParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontierParams {
    /// Clusters whose longest bounding-box edge exceeds this are bisected (m).
    pub split_threshold: f64,
    /// Unreachable pairs are costed at Euclidean distance times this.
    pub unreachable_factor: f64,
    /// Expansion budget of a single pairwise path search.
    pub search_budget: usize,
    /// Radius of the per-plan distance field around the vehicle (m).
    pub field_radius: f64,
    pub viewpoints: ViewpointParams,
}

impl Default for FrontierParams {
    fn default() -> Self {
        FrontierParams {
            split_threshold: 2.0,
            unreachable_factor: 2.0,
            search_budget: 200_000,
            field_radius: 24.0,
            viewpoints: ViewpointParams::default(),
        }
    }
}

impl FrontierParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.split_threshold > 0.0) {
            return Err("split_threshold must be positive".into());
        }
        if !(self.unreachable_factor >= 1.0) {
            return Err("unreachable_factor must be at least 1".into());
        }
        if !(self.field_radius > 0.0) || self.search_budget == 0 {
            return Err("field_radius and search_budget must be positive".into());
        }
        let v = &self.viewpoints;
        if v.radii.is_empty() || v.radii.iter().any(|r| !(*r > 0.0)) {
            return Err("viewpoint radii must be positive".into());
        }
        if !(v.angle_step_deg > 0.0 && v.angle_step_deg <= 360.0) || !(v.safety_margin >= 0.0) {
            return Err("invalid viewpoint angle step or safety margin".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frontier {
    pub id: u64,
    /// Sorted, unique.
    pub cells: Vec<Voxel>,
    pub avg_position: Vec3,
    pub bbox: VoxelBox,
    pub near_count: usize,
    pub birth_tick: u64,
    pub birth_time: f64,
    /// Cost of the edge from this frontier to others, from the last plan (s).
    pub importance_costs: BTreeMap<u64, f64>,
    pub viewpoints: Vec<ViewpointCandidate>,
    /// Free voxel next to a cell, closest to `avg_position`. Path distances
    /// are measured from here.
    pub anchor: Option<Voxel>,
    viewpoints_dirty: bool,
}

impl Frontier {
    pub fn new(id: u64, cells: Vec<Voxel>, birth_tick: u64, birth_time: f64, view: &LayerView) -> Self {
        let map = view.map();
        let mut sum = Vec3::zeros();
        let mut bbox = VoxelBox::empty();
        for c in &cells {
            sum += map.center(*c);
            bbox.include(*c);
        }
        let avg_position = sum / cells.len().max(1) as f64;
        let mut anchor: Option<(f64, Voxel)> = None;
        for c in &cells {
            for o in FACE_OFFSETS {
                let u = c.offset(o);
                if view.state(u) == Some(VoxelState::Free) {
                    let d = (map.center(u) - avg_position).norm_squared();
                    if anchor.map_or(true, |(bd, bv)| d < bd || (d == bd && u < bv)) {
                        anchor = Some((d, u));
                    }
                }
            }
        }
        Frontier {
            id,
            cells,
            avg_position,
            bbox,
            near_count: 0,
            birth_tick,
            birth_time,
            importance_costs: BTreeMap::new(),
            viewpoints: Vec::new(),
            anchor: anchor.map(|a| a.1),
            viewpoints_dirty: true,
        }
    }

    /// Seconds since first appearance.
    pub fn duration(&self, now: f64) -> f64 {
        now - self.birth_time
    }

    /// Position used for path distances.
    pub fn anchor_position(&self, view: &LayerView) -> Vec3 {
        self.anchor.map_or(self.avg_position, |a| view.map().center(a))
    }

    pub fn snapshot(&self, now: f64) -> FrontierSnapshot {
        let p = self.avg_position;
        FrontierSnapshot {
            id: self.id,
            cells: self.cells.len(),
            avg_position: [p.x, p.y, p.z],
            near_count: self.near_count,
            duration: self.duration(now),
        }
    }
}

/// Compact frontier record for trace output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierSnapshot {
    pub id: u64,
    pub cells: usize,
    pub avg_position: [f64; 3],
    pub near_count: usize,
    pub duration: f64,
}

/// Euclidean distance between average positions.
pub fn center_distance(a: &Frontier, b: &Frontier) -> f64 {
    (a.avg_position - b.avg_position).norm()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChangeReport {
    pub removed: Vec<u64>,
    pub added: Vec<u64>,
    /// Ids kept across the update whose cells changed.
    pub modified: Vec<u64>,
}

impl ChangeReport {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.added.is_empty() && self.modified.is_empty()
    }

    /// Ids whose cached distances are no longer valid.
    pub fn touched(&self) -> impl Iterator<Item = u64> + '_ {
        self.removed.iter().chain(&self.added).chain(&self.modified).copied()
    }
}

#[derive(Clone, Debug, Default)]
pub struct FrontierSet {
    frontiers: BTreeMap<u64, Frontier>,
    next_id: u64,
    tick: u64,
    time: f64,
    split_threshold: f64,
    /// Voxels changed since viewpoints were last refreshed.
    pending: VoxelBox,
}

impl FrontierSet {
    pub fn new(split_threshold: f64) -> Self {
        FrontierSet { split_threshold, next_id: 1, pending: VoxelBox::empty(), ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.frontiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frontiers.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Frontier> {
        self.frontiers.get(&id)
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut Frontier> {
        self.frontiers.get_mut(&id)
    }

    /// Frontiers in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Frontier> {
        self.frontiers.values()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.frontiers.keys().copied().collect()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_clock(&mut self, tick: u64, time: f64) {
        self.tick = tick;
        self.time = time;
    }

    /// Every frontier cell, sorted.
    pub fn all_cells(&self) -> Vec<Voxel> {
        let mut out: Vec<Voxel> = self.frontiers.values().flat_map(|f| f.cells.iter().copied()).collect();
        out.sort_unstable();
        out
    }

    /// Drops every frontier (used when the active view changes).
    pub fn clear(&mut self) -> Vec<u64> {
        let ids = self.ids();
        self.frontiers.clear();
        self.pending = VoxelBox::empty();
        ids
    }

    pub fn insert_for_test(&mut self, f: Frontier) {
        self.next_id = self.next_id.max(f.id + 1);
        self.frontiers.insert(f.id, f);
    }

    /// Recomputes viewpoints of frontiers near anything changed since the
    /// previous call (and of new or modified ones).
    pub fn refresh_viewpoints(&mut self, view: &LayerView, sensor: &SensorSpec, params: &ViewpointParams) {
        let res = view.map().resolution();
        let reach = params.radii.iter().cloned().fold(0.0, f64::max) + params.safety_margin;
        let pad = (reach / res).ceil() as i32 + 1;
        let pending = self.pending;
        for f in self.frontiers.values_mut() {
            if f.viewpoints_dirty || f.bbox.expanded(pad).intersects(&pending) {
                f.viewpoints = sample_viewpoints(f, view, sensor, params);
                f.viewpoints_dirty = false;
            }
        }
        self.pending = VoxelBox::empty();
    }
}

/// Unknown voxel 6-adjacent to a free voxel, both inside the view.
pub fn is_frontier_cell(view: &LayerView, v: Voxel) -> bool {
    view.state(v) == Some(VoxelState::Unknown)
        && FACE_OFFSETS.iter().any(|o| view.state(v.offset(*o)) == Some(VoxelState::Free))
}

/// Frontier cells inside `region` (clipped to the view), in scan order.
pub fn scan_frontier_cells(view: &LayerView, region: &VoxelBox) -> Vec<Voxel> {
    let r = region.intersection(&view.bounds());
    r.iter().filter(|v| is_frontier_cell(view, *v)).collect()
}

/// Incremental update after the voxels in `changed` were modified. Only
/// frontiers near the change are rebuilt; a rebuilt cluster inherits id and
/// birth time from the old frontier it overlaps most (ties: lower id).
pub fn extract_frontiers(view: &LayerView, changed: &VoxelBox, set: &mut FrontierSet) -> ChangeReport {
    let mut report = ChangeReport::default();
    let e = changed.expanded(1).intersection(&view.bounds());
    if e.is_empty() {
        return report;
    }
    set.pending = set.pending.union(&e);
    let touch = e.expanded(1);
    let affected: Vec<u64> =
        set.frontiers.values().filter(|f| f.bbox.intersects(&touch)).map(|f| f.id).collect();

    let mut owner: HashMap<Voxel, u64> = HashMap::new();
    let mut pool = scan_frontier_cells(view, &e);
    for id in &affected {
        for c in &set.frontiers[id].cells {
            owner.insert(*c, *id);
            if !e.contains(*c) {
                pool.push(*c);
            }
        }
    }
    let clusters = cluster_cells(&pool, view.map().resolution(), set.split_threshold);

    // greedy identity transfer by overlap
    let mut pairs: Vec<(usize, u64, usize)> = Vec::new();
    for (k, c) in clusters.iter().enumerate() {
        let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
        for v in c {
            if let Some(id) = owner.get(v) {
                *counts.entry(*id).or_default() += 1;
            }
        }
        pairs.extend(counts.into_iter().map(|(id, n)| (n, id, k)));
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned: Vec<Option<u64>> = vec![None; clusters.len()];
    let mut used: Vec<u64> = Vec::new();
    for (_, id, k) in pairs {
        if assigned[k].is_none() && !used.contains(&id) {
            assigned[k] = Some(id);
            used.push(id);
        }
    }

    let mut old: BTreeMap<u64, Frontier> = BTreeMap::new();
    for id in &affected {
        old.insert(*id, set.frontiers.remove(id).unwrap());
    }
    for (k, cells) in clusters.into_iter().enumerate() {
        match assigned[k] {
            Some(id) => {
                let prev = old.remove(&id).unwrap();
                if prev.cells == cells {
                    set.frontiers.insert(id, prev);
                } else {
                    let f = Frontier::new(id, cells, prev.birth_tick, prev.birth_time, view);
                    set.frontiers.insert(id, f);
                    report.modified.push(id);
                }
            }
            None => {
                let id = set.next_id;
                set.next_id += 1;
                let f = Frontier::new(id, cells, set.tick, set.time, view);
                set.frontiers.insert(id, f);
                report.added.push(id);
            }
        }
    }
    report.removed = old.into_keys().collect();
    report
}

/// Path-distance oracle used by the planners.
pub trait PathMetric {
    /// Path distance between two frontiers (m).
    fn between(&mut self, a: &Frontier, b: &Frontier) -> f64;
    /// Path distance from the vehicle to a frontier (m).
    fn from_pose(&mut self, f: &Frontier) -> f64;
    /// Whether `between(a, b) < bound`; implementations may answer cheaply.
    fn within(&mut self, a: &Frontier, b: &Frontier, bound: f64) -> bool {
        self.between(a, b) < bound
    }
    /// Lets a metric answer the `within` queries among `frontiers` in bulk
    /// before they are asked one by one.
    fn prepare_near(&mut self, _frontiers: &[&Frontier], _bound: f64) {}
}

/// Straight-line distances between average positions.
#[derive(Clone, Copy, Debug)]
pub struct EuclideanMetric {
    pub uav: Vec3,
}

impl PathMetric for EuclideanMetric {
    fn between(&mut self, a: &Frontier, b: &Frontier) -> f64 {
        center_distance(a, b)
    }

    fn from_pose(&mut self, f: &Frontier) -> f64 {
        (f.avg_position - self.uav).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Cached {
    Exact(f64),
    AtLeast(f64),
    AtMost(f64),
}

/// Pairwise distances kept across plans; entries of touched frontiers are
/// dropped after each update.
#[derive(Clone, Debug, Default)]
pub struct PairCache {
    entries: BTreeMap<(u64, u64), Cached>,
}

impl PairCache {
    pub fn invalidate(&mut self, ids: impl IntoIterator<Item = u64>) {
        let mut ids: Vec<u64> = ids.into_iter().collect();
        if ids.is_empty() {
            return;
        }
        ids.sort_unstable();
        self.entries.retain(|(a, b), _| ids.binary_search(a).is_err() && ids.binary_search(b).is_err());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Grid path distances: frontier pairs by A* between anchors (cached), the
/// vehicle by a precomputed distance field. Failed searches fall back to
/// the scaled Euclidean distance.
pub struct NavMetric<'a> {
    pub view: LayerView<'a>,
    pub field: &'a DistanceField,
    pub cache: &'a mut PairCache,
    pub uav: Vec3,
    pub unreachable_factor: f64,
    pub search_budget: usize,
}

impl<'a> NavMetric<'a> {
    fn key(a: &Frontier, b: &Frontier) -> (u64, u64) {
        (a.id.min(b.id), a.id.max(b.id))
    }

    fn fallback(&self, a: &Vec3, b: &Vec3, lower: f64) -> f64 {
        ((a - b).norm() * self.unreachable_factor).max(lower)
    }

    fn search(&mut self, a: &Frontier, b: &Frontier, bound: f64) -> Cached {
        let pa = a.anchor_position(&self.view);
        let pb = b.anchor_position(&self.view);
        let q = AstarQuery { bound, max_expansions: self.search_budget, no_corner_cutting: false };
        match bounded_distance(&self.view, &pa, &pb, &q) {
            Ok(SearchOutcome::Found(d)) => Cached::Exact(d),
            Ok(SearchOutcome::Beyond(lb)) => Cached::AtLeast(lb),
            Ok(SearchOutcome::Exhausted(lb)) => Cached::Exact(self.fallback(&a.avg_position, &b.avg_position, lb)),
            Ok(SearchOutcome::Unreachable) | Err(_) => {
                Cached::Exact(self.fallback(&a.avg_position, &b.avg_position, 0.0))
            }
        }
    }
}

thread_local! {
    static NEAR_FIELD: RefCell<DistanceField> = RefCell::new(DistanceField::new());
}

impl<'a> NavMetric<'a> {
    fn answered(&self, k: &(u64, u64), bound: f64) -> bool {
        match self.cache.entries.get(k) {
            Some(Cached::Exact(_)) => true,
            Some(Cached::AtLeast(d)) => *d >= bound,
            Some(Cached::AtMost(d)) => *d < bound,
            None => false,
        }
    }

    /// Decides `d(a, b) < bound` from the vehicle field alone when the
    /// triangle inequality allows it.
    fn triangle(&self, a: &Frontier, b: &Frontier, bound: f64) -> Option<Cached> {
        let (Some(va), Some(vb)) = (a.anchor, b.anchor) else { return None };
        let (FieldValue::Distance(da), FieldValue::Distance(db)) =
            (self.field.get(&self.view, va), self.field.get(&self.view, vb))
        else {
            return None;
        };
        let eps = 1e-9 * (1.0 + da + db);
        if (da - db).abs() >= bound + eps {
            Some(Cached::AtLeast((da - db).abs() - eps))
        } else if da + db + eps < bound {
            Some(Cached::AtMost(da + db + eps))
        } else {
            None
        }
    }
}

impl<'a> PathMetric for NavMetric<'a> {
    fn between(&mut self, a: &Frontier, b: &Frontier) -> f64 {
        if a.id == b.id {
            return 0.0;
        }
        let k = Self::key(a, b);
        if let Some(Cached::Exact(d)) = self.cache.entries.get(&k) {
            return *d;
        }
        let r = self.search(a, b, f64::INFINITY);
        self.cache.entries.insert(k, r);
        match r {
            Cached::Exact(d) | Cached::AtLeast(d) | Cached::AtMost(d) => d,
        }
    }

    fn from_pose(&mut self, f: &Frontier) -> f64 {
        let Some(a) = f.anchor else {
            return self.fallback(&self.uav, &f.avg_position, 0.0);
        };
        match self.field.get(&self.view, a) {
            FieldValue::Distance(d) => d,
            FieldValue::Unreachable => self.fallback(&self.uav, &f.avg_position, 0.0),
            FieldValue::AtLeast(r) => self.fallback(&self.uav, &f.avg_position, r),
        }
    }

    fn within(&mut self, a: &Frontier, b: &Frontier, bound: f64) -> bool {
        if a.id == b.id {
            return 0.0 < bound;
        }
        let pa = a.anchor_position(&self.view);
        let pb = b.anchor_position(&self.view);
        if (pa - pb).norm() >= bound {
            return false;
        }
        let k = Self::key(a, b);
        match self.cache.entries.get(&k) {
            Some(Cached::Exact(d)) => return *d < bound,
            Some(Cached::AtLeast(d)) if *d >= bound => return false,
            Some(Cached::AtMost(d)) if *d < bound => return true,
            _ => {}
        }
        if let Some(r) = self.triangle(a, b, bound) {
            self.cache.entries.insert(k, r);
            return matches!(r, Cached::AtMost(_));
        }
        let r = self.search(a, b, bound);
        self.cache.entries.insert(k, r);
        match r {
            Cached::Exact(d) => d < bound,
            Cached::AtLeast(_) | Cached::AtMost(_) => false,
        }
    }

    /// One bounded Dijkstra from an anchor settles every pair it is part of.
    /// Anchors with the most unanswered pairs go first.
    fn prepare_near(&mut self, fs: &[&Frontier], bound: f64) {
        let pos: Vec<Option<Vec3>> =
            fs.iter().map(|f| f.anchor.map(|a| self.view.map().center(a))).collect();
        let n = fs.len();
        let mut missing: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let Some(pi) = pos[i] else { continue };
            for j in i + 1..n {
                let Some(pj) = pos[j] else { continue };
                if (pi - pj).norm() >= bound {
                    continue;
                }
                let k = Self::key(fs[i], fs[j]);
                if self.answered(&k, bound) {
                    continue;
                }
                if let Some(r) = self.triangle(fs[i], fs[j], bound) {
                    self.cache.entries.insert(k, r);
                    continue;
                }
                missing[i].push(j);
                missing[j].push(i);
            }
        }
        NEAR_FIELD.with(|cell| {
            let mut field = cell.borrow_mut();
            loop {
                let Some(i) = (0..n).filter(|&i| !missing[i].is_empty()).max_by(|&a, &b| {
                    missing[a].len().cmp(&missing[b].len()).then(b.cmp(&a))
                }) else {
                    break;
                };
                let js = std::mem::take(&mut missing[i]);
                let targets: Vec<Voxel> = js.iter().map(|&j| fs[j].anchor.unwrap()).collect();
                field.compute(&self.view, fs[i].anchor.unwrap(), &targets, bound, 0.0);
                for (&j, t) in js.iter().zip(&targets) {
                    let r = match field.get(&self.view, *t) {
                        FieldValue::Distance(d) => Cached::Exact(d),
                        FieldValue::AtLeast(r) => Cached::AtLeast(r),
                        FieldValue::Unreachable => Cached::Exact(self.fallback(
                            &fs[i].avg_position,
                            &fs[j].avg_position,
                            0.0,
                        )),
                    };
                    self.cache.entries.insert(Self::key(fs[i], fs[j]), r);
                    missing[j].retain(|&x| x != i);
                }
            }
        });
    }
}

/// Recomputes `near_count` of every frontier: the number of other frontiers
/// closer than `s_near` along a path.
pub fn update_info<M: PathMetric>(set: &mut FrontierSet, metric: &mut M, s_near: f64) {
    {
        let all: Vec<&Frontier> = set.frontiers.values().collect();
        metric.prepare_near(&all, s_near);
    }
    let ids = set.ids();
    let mut counts = vec![0usize; ids.len()];
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (a, b) = (&set.frontiers[&ids[i]], &set.frontiers[&ids[j]]);
            if metric.within(a, b, s_near) {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    for (id, n) in ids.iter().zip(counts) {
        set.frontiers.get_mut(id).unwrap().near_count = n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::VoxelMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(view: &LayerView) -> Vec<Voxel> {
        let mut out = Vec::new();
        for v in view.bounds().iter() {
            if view.state(v) != Some(VoxelState::Unknown) {
                continue;
            }
            let mut adj = false;
            for o in FACE_OFFSETS {
                adj |= view.state(v.offset(o)) == Some(VoxelState::Free);
            }
            if adj {
                out.push(v);
            }
        }
        out.sort_unstable();
        out
    }

    #[test]
    fn single_unknown_in_free_plane() {
        let mut m = VoxelMap::new(Vec3::zeros(), [3, 3, 1], 0.1, 1.0).unwrap();
        for v in m.full_box().iter() {
            if v != Voxel::new(1, 1, 0) {
                m.set_state(v, VoxelState::Free);
            }
        }
        let mut set = FrontierSet::new(2.0);
        let view = m.full_view();
        let r = extract_frontiers(&view, &m.full_box(), &mut set);
        assert_eq!(r.added.len(), 1);
        assert_eq!(set.iter().next().unwrap().cells, vec![Voxel::new(1, 1, 0)]);
    }

    #[test]
    fn free_view_has_no_frontiers() {
        let mut m = VoxelMap::new(Vec3::zeros(), [4, 4, 4], 0.1, 1.0).unwrap();
        for v in m.full_box().iter() {
            m.set_state(v, VoxelState::Free);
        }
        let mut set = FrontierSet::new(2.0);
        extract_frontiers(&m.full_view(), &m.full_box(), &mut set);
        assert!(set.is_empty());
    }

    #[test]
    fn incremental_matches_batch_and_keeps_untouched_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = VoxelMap::new(Vec3::zeros(), [30, 30, 30], 0.1, 1.0).unwrap();
        let mut set = FrontierSet::new(1.0);
        for step in 0..15 {
            let lo = Voxel::new(rng.gen_range(0..26), rng.gen_range(0..26), rng.gen_range(0..26));
            let hi = lo.offset([rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5)]);
            let b = VoxelBox::new(lo, hi);
            for v in b.iter() {
                let s = if rng.gen_bool(0.8) { VoxelState::Free } else { VoxelState::Occupied };
                m.set_state(v, s);
            }
            let before: BTreeMap<u64, Frontier> = set.iter().map(|f| (f.id, f.clone())).collect();
            set.set_clock(step, step as f64);
            let rep = extract_frontiers(&m.full_view(), &b, &mut set);
            assert_eq!(set.all_cells(), brute_force(&m.full_view()), "step {step}");
            let touch = b.expanded(2);
            for (id, f) in &before {
                if !f.bbox.intersects(&touch) {
                    let now = set.get(*id).unwrap();
                    assert_eq!(now.cells, f.cells);
                    assert_eq!(now.birth_time, f.birth_time);
                }
            }
            for id in &rep.modified {
                assert_eq!(set.get(*id).unwrap().birth_time, before[id].birth_time);
            }
        }
    }

    #[test]
    fn layer_view_limits_cells() {
        let mut m = VoxelMap::new(Vec3::zeros(), [5, 5, 10], 0.1, 1.0).unwrap();
        for v in m.full_box().iter() {
            if v.z < 5 {
                m.set_state(v, VoxelState::Free);
            }
        }
        let view = m.clip_to_layer(0.0, 0.5).unwrap();
        let mut set = FrontierSet::new(2.0);
        extract_frontiers(&view, &m.full_box(), &mut set);
        // unknown voxels at z = 5 lie outside the slab
        assert!(set.is_empty());
        let view = m.clip_to_layer(0.0, 0.6).unwrap();
        extract_frontiers(&view, &m.full_box(), &mut set);
        assert_eq!(set.all_cells().len(), 25);
    }

    #[test]
    fn center_distance_three_four_five() {
        let m = VoxelMap::new(Vec3::zeros(), [4, 4, 4], 0.1, 1.0).unwrap();
        let v = m.full_view();
        let mut a = Frontier::new(1, vec![Voxel::new(0, 0, 0)], 0, 0.0, &v);
        let mut b = a.clone();
        a.avg_position = Vec3::new(0.0, 0.0, 1.0);
        b.avg_position = Vec3::new(3.0, 4.0, 1.0);
        assert_eq!(center_distance(&a, &b), 5.0);
        assert_eq!(center_distance(&a, &a), 0.0);
    }

    fn point_frontier(id: u64, p: Vec3, view: &LayerView) -> Frontier {
        let mut f = Frontier::new(id, vec![Voxel::new(0, 0, 0)], 0, 0.0, view);
        f.avg_position = p;
        f
    }

    #[test]
    fn near_count_gate() {
        let m = VoxelMap::new(Vec3::zeros(), [4, 4, 4], 0.1, 1.0).unwrap();
        let v = m.full_view();
        let mut set = FrontierSet::new(2.0);
        set.insert_for_test(point_frontier(1, Vec3::new(0.0, 0.0, 0.0), &v));
        set.insert_for_test(point_frontier(2, Vec3::new(4.0, 0.0, 0.0), &v));
        update_info(&mut set, &mut EuclideanMetric { uav: Vec3::zeros() }, 8.0);
        assert!(set.iter().all(|f| f.near_count == 1));
        update_info(&mut set, &mut EuclideanMetric { uav: Vec3::zeros() }, 4.0);
        assert!(set.iter().all(|f| f.near_count == 0));
    }

    #[test]
    fn near_count_matches_all_pairs() {
        let m = VoxelMap::new(Vec3::zeros(), [4, 4, 4], 0.1, 1.0).unwrap();
        let v = m.full_view();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut set = FrontierSet::new(2.0);
        for id in 1..=12 {
            let p = Vec3::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), 1.0);
            set.insert_for_test(point_frontier(id, p, &v));
        }
        update_info(&mut set, &mut EuclideanMetric { uav: Vec3::zeros() }, 8.0);
        let all: Vec<Frontier> = set.iter().cloned().collect();
        for f in &all {
            let n = all.iter().filter(|g| g.id != f.id && center_distance(f, g) < 8.0).count();
            assert_eq!(f.near_count, n);
        }
    }

    /// Maze-like slab: random pillars, a few isolated pockets, and single
    /// unknown cells as frontiers.
    fn pillar_map(seed: u64) -> (VoxelMap, Vec<Voxel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = VoxelMap::new(Vec3::zeros(), [40, 40, 3], 0.1, 1.0).unwrap();
        for v in m.full_box().iter() {
            m.set_state(v, VoxelState::Free);
        }
        for _ in 0..60 {
            let (x, y) = (rng.gen_range(0..40), rng.gen_range(0..40));
            for z in 0..3 {
                m.set_state(Voxel::new(x, y, z), VoxelState::Occupied);
            }
        }
        // A walled pocket nobody can reach.
        for x in 30..36 {
            for y in 30..36 {
                if x == 30 || y == 30 || x == 35 || y == 35 {
                    for z in 0..3 {
                        m.set_state(Voxel::new(x, y, z), VoxelState::Occupied);
                    }
                }
            }
        }
        let mut cells = vec![Voxel::new(32, 32, 1)];
        while cells.len() < 25 {
            let v = Voxel::new(rng.gen_range(1..39), rng.gen_range(1..39), 1);
            if m.state(v) == Some(VoxelState::Free) && !(30..36).contains(&v.x) {
                cells.push(v);
            }
        }
        for c in &cells {
            m.set_state(*c, VoxelState::Unknown);
        }
        m.refresh_clearance();
        (m, cells)
    }

    #[test]
    fn pruned_near_counts_match_pairwise_search() {
        for seed in 0..4 {
            let (m, cells) = pillar_map(seed);
            let view = m.full_view();
            let mut set = FrontierSet::new(2.0);
            for (k, c) in cells.iter().enumerate() {
                set.insert_for_test(Frontier::new(k as u64 + 1, vec![*c], 0, 0.0, &view));
            }
            let uav = m.center(Voxel::new(1, 1, 1));
            let anchors: Vec<Voxel> = set.iter().filter_map(|f| f.anchor).collect();
            let mut field = DistanceField::new();
            field.compute(&view, Voxel::new(1, 1, 1), &anchors, 2.5, 1.0);
            let bound = 1.5;
            let mut cache = PairCache::default();
            let mut metric = NavMetric {
                view: view.clone(),
                field: &field,
                cache: &mut cache,
                uav,
                unreachable_factor: 2.0,
                search_budget: 1_000_000,
            };
            update_info(&mut set, &mut metric, bound);
            let all: Vec<Frontier> = set.iter().cloned().collect();
            assert!(all.iter().any(|f| f.near_count > 0));
            for f in &all {
                let n = all
                    .iter()
                    .filter(|g| g.id != f.id)
                    .filter(|g| {
                        let (pa, pb) = (m.center(f.anchor.unwrap()), m.center(g.anchor.unwrap()));
                        if (pa - pb).norm() >= bound {
                            return false;
                        }
                        match astar_distance(&view, &pa, &pb).unwrap() {
                            Some(d) => d < bound,
                            None => 2.0 * (f.avg_position - g.avg_position).norm() < bound,
                        }
                    })
                    .count();
                assert_eq!(f.near_count, n, "seed {seed} frontier {}", f.id);
            }
        }
    }
}
