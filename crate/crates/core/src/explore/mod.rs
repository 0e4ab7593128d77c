//! Closed-loop exploration: sense, map, extract frontiers, plan and fly, one
//! altitude layer at a time.

mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontier::{
    bounded_distance, extract_frontiers, update_info, AstarQuery, DistanceField, FieldValue, Frontier, FrontierParams,
    FrontierSet, NavMetric, PairCache, PathMetric, SearchOutcome,
};
use crate::geom::Vec3;
use crate::global::{plan_global, plan_global_full, GlobalError, OmissionParams};
use crate::local::{
    build_viewpoint_dag, classify_scenario, filter_viewpoints, frame_obstacle_ratio, generate_trajectory,
    shortest_local_path, LocalError, LocalParams, ObstacleWindow, Trajectory, TrajectoryParams, ViewpointCandidate,
};
use crate::sim::baseline::{baseline_fov, baseline_nearest};
use crate::sim::{render_depth, Pose, SensorSpec, SimError, UavModel, WorldModel};
use crate::voxel::{integrate_frame_with, LayerView, MapError, Voxel, VoxelMap, VoxelState};

pub use report::{
    metrics_csv, BlockTimes, EpisodeReport, EpisodeTrace, ExecutedSegment, GlobalTiming, LayerRecord, PlanDump,
    PlanEvent, Termination, TickMetrics, METRICS_HEADER,
};

#[derive(Debug, Error, PartialEq)]
pub enum ExploreError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Global(#[from] GlobalError),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error("spawn pose has less than {0} m of clearance")]
    SpawnTooClose(f64),
    #[error("already at the top layer")]
    AtMaxHeight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    GoFeap,
    Nearest,
    Fov,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::GoFeap => "go_feap",
            PlannerKind::Nearest => "nearest",
            PlannerKind::Fov => "fov",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "go_feap" => Ok(PlannerKind::GoFeap),
            "nearest" => Ok(PlannerKind::Nearest),
            "fov" => Ok(PlannerKind::Fov),
            _ => Err(format!("unknown planner '{s}' (expected go_feap, nearest or fov)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    pub planner: PlannerKind,
    pub sensor: SensorSpec,
    pub omission: OmissionParams,
    pub local: LocalParams,
    pub frontier: FrontierParams,
    pub trajectory: TrajectoryParams,
    /// Layer height (m).
    pub z_layer: f64,
    /// Exploration ceiling (m); the world height when absent.
    pub z_max: Option<f64>,
    /// Simulation tick (s).
    pub dt: f64,
    pub max_ticks: u64,
    /// Clearance field cap (m).
    pub clearance_cap: f64,
    /// Fruitless visits after which a frontier is given up.
    pub max_visit_failures: u32,
    /// Write measured block times into the metrics (breaks byte-identical reruns).
    pub record_wall_times: bool,
    /// Plan events at which compressed and full global planning are both timed.
    pub global_timing_samples: usize,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            planner: PlannerKind::GoFeap,
            sensor: SensorSpec::default(),
            omission: OmissionParams::default(),
            local: LocalParams::default(),
            frontier: FrontierParams::default(),
            trajectory: TrajectoryParams::default(),
            z_layer: 3.0,
            z_max: None,
            dt: 0.2,
            max_ticks: 20_000,
            clearance_cap: 0.5,
            max_visit_failures: 2,
            record_wall_times: false,
            global_timing_samples: 0,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        let bad = |m: String| Err(ExploreError::Config(m));
        self.sensor.validate().or_else(bad)?;
        self.omission.validate()?;
        self.local.validate().or_else(bad)?;
        self.frontier.validate().or_else(bad)?;
        let t = &self.trajectory;
        if !(t.v_max > 0.0 && t.yaw_rate_max > 0.0 && t.accel > 0.0 && t.safety_margin >= 0.0) {
            return bad("trajectory limits must be positive".into());
        }
        if t.v_max != self.omission.v_max {
            return bad(format!("trajectory.v_max {} differs from omission.v_max {}", t.v_max, self.omission.v_max));
        }
        if !(self.z_layer > 0.0) || self.z_max.is_some_and(|z| !(z > 0.0)) {
            return bad("z_layer and z_max must be positive".into());
        }
        if !(self.dt > 0.0) || self.max_ticks == 0 {
            return bad("dt and max_ticks must be positive".into());
        }
        if self.clearance_cap < t.safety_margin || self.clearance_cap < self.frontier.viewpoints.safety_margin {
            return bad("clearance_cap must cover the safety margins".into());
        }
        if self.max_visit_failures == 0 {
            return bad("max_visit_failures must be at least 1".into());
        }
        Ok(())
    }
}

/// Altitude layers `[k z, (k + 1) z)`, clamped to the ceiling, visited upward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSchedule {
    pub z_layer: f64,
    pub z_max: f64,
    index: usize,
}

impl LayerSchedule {
    pub fn new(z_layer: f64, z_max: f64) -> Result<Self, ExploreError> {
        if !(z_layer > 0.0 && z_max > 0.0) {
            return Err(ExploreError::Config("layer height and ceiling must be positive".into()));
        }
        Ok(LayerSchedule { z_layer, z_max, index: 0 })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn bounds(&self) -> (f64, f64) {
        let lo = self.index as f64 * self.z_layer;
        (lo, ((self.index + 1) as f64 * self.z_layer).min(self.z_max))
    }

    pub fn is_last(&self) -> bool {
        (self.index + 1) as f64 * self.z_layer >= self.z_max
    }

    pub fn advance_layer(&mut self) -> Result<(f64, f64), ExploreError> {
        if self.is_last() {
            return Err(ExploreError::AtMaxHeight);
        }
        self.index += 1;
        Ok(self.bounds())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepResult {
    Executing,
    NewTrajectory,
    LayerComplete,
    Done,
}

struct Active {
    traj: Trajectory,
    t: f64,
    target: u64,
    cells: Vec<Voxel>,
    /// In-place turn with no frontier target.
    look_around: bool,
}

struct Decision {
    target: u64,
    order: Vec<u64>,
    tries: Vec<ViewpointCandidate>,
    compressed_dim: Option<usize>,
    dump: Option<PlanDump>,
    /// Outgoing edge costs of the planned frontiers.
    importance: Vec<(u64, BTreeMap<u64, f64>)>,
}

#[derive(Default)]
struct Clocks {
    frontier: f64,
    global: f64,
    local: f64,
    traj: f64,
}

/// One exploration episode over a ground-truth world.
pub struct Explorer<'w> {
    world: &'w WorldModel,
    cfg: ExplorationConfig,
    map: VoxelMap,
    set: FrontierSet,
    sched: LayerSchedule,
    uav: UavModel,
    window: ObstacleWindow,
    field: DistanceField,
    cache: PairCache,
    reachable: Vec<bool>,
    reachable_total: usize,
    known_reachable: usize,
    tick: u64,
    distance: f64,
    active: Option<Active>,
    failures: BTreeMap<u64, u32>,
    unexplorable: BTreeSet<u64>,
    blocked: BTreeSet<u64>,
    carried: Option<Vec<VoxelState>>,
    turns_left: u8,
    turned_at: Option<Voxel>,
    dumps: bool,
    done: Option<Termination>,
    sums: BlockTimes,
    counts: [usize; 4],
    planning_failures: usize,
    visit_failures: usize,
    trace: EpisodeTrace,
    layers: Vec<LayerRecord>,
    timings: Vec<GlobalTiming>,
}

impl<'w> Explorer<'w> {
    pub fn new(world: &'w WorldModel, cfg: ExplorationConfig) -> Result<Self, ExploreError> {
        cfg.validate()?;
        world.validate()?;
        let mut map = world.blank_map(cfg.clearance_cap);
        map.close_shell();
        let bubble = cfg.trajectory.safety_margin + world.resolution;
        let spawn = world.spawn;
        if world.clearance(world.voxel_at(&spawn.position), bubble + world.resolution) <= bubble {
            return Err(ExploreError::SpawnTooClose(bubble));
        }
        map.clear_sphere(&spawn.position, bubble);
        map.refresh_clearance();
        let reachable = world.reachable_from_spawn();
        let reachable_total = reachable.iter().filter(|r| **r).count();
        let known_reachable =
            reachable.iter().enumerate().filter(|(i, r)| **r && map.state_at_index(*i) == VoxelState::Free).count();
        let z_max = cfg.z_max.unwrap_or(world.dims_m[2]).min(world.dims_m[2]);
        let sched = LayerSchedule::new(cfg.z_layer, z_max)?;
        let mut set = FrontierSet::new(cfg.frontier.split_threshold);
        {
            let (lo, hi) = sched.bounds();
            let view = map.clip_to_layer(lo, hi)?;
            extract_frontiers(&view, &view.bounds(), &mut set);
        }
        let (lo, hi) = sched.bounds();
        Ok(Explorer {
            world,
            uav: UavModel::at(spawn, cfg.trajectory.v_max, cfg.trajectory.yaw_rate_max),
            window: ObstacleWindow::new(cfg.local.window_capacity),
            cfg,
            map,
            set,
            sched,
            field: DistanceField::new(),
            cache: PairCache::default(),
            reachable,
            reachable_total,
            known_reachable,
            tick: 0,
            distance: 0.0,
            active: None,
            failures: BTreeMap::new(),
            unexplorable: BTreeSet::new(),
            blocked: BTreeSet::new(),
            carried: None,
            turns_left: 0,
            turned_at: None,
            dumps: false,
            done: None,
            sums: BlockTimes::default(),
            counts: [0; 4],
            planning_failures: 0,
            visit_failures: 0,
            trace: EpisodeTrace::default(),
            layers: vec![LayerRecord::start(0, lo, hi, 0)],
            timings: Vec::new(),
        })
    }

    /// Keeps the cost matrix and tour of every global plan.
    pub fn enable_dumps(&mut self) {
        self.dumps = true;
    }

    pub fn map(&self) -> &VoxelMap {
        &self.map
    }

    pub fn frontiers(&self) -> &FrontierSet {
        &self.set
    }

    pub fn schedule(&self) -> &LayerSchedule {
        &self.sched
    }

    pub fn uav(&self) -> &UavModel {
        &self.uav
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn coverage(&self) -> f64 {
        if self.reachable_total == 0 {
            return 1.0;
        }
        self.known_reachable as f64 / self.reachable_total as f64
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn into_trace(self) -> EpisodeTrace {
        self.trace
    }

    /// One tick: sense, update the map and frontiers, replan if needed, then
    /// fly `dt` along the current trajectory.
    pub fn step(&mut self) -> Result<StepResult, ExploreError> {
        if self.done.is_some() {
            return Ok(StepResult::Done);
        }
        let time = self.time();
        let mut clocks = Clocks::default();

        let t0 = Instant::now();
        let frame = render_depth(self.world, &self.uav.pose(), &self.cfg.sensor)?;
        let reachable = &self.reachable;
        let mut gained = 0usize;
        let changed = integrate_frame_with(&mut self.map, &frame, |i, old, _| {
            if old == VoxelState::Unknown && reachable[i] {
                gained += 1;
            }
        })?;
        self.known_reachable += gained;
        self.map.recompute_clearance(&changed);
        if let Some(before) = self.carried.take() {
            let reverted = before
                .iter()
                .zip(self.map.states())
                .filter(|(a, b)| **a != VoxelState::Unknown && a != b)
                .count();
            self.layers.last_mut().unwrap().reverted_voxels = reverted;
        }
        self.window.update(frame_obstacle_ratio(&frame)?);
        self.set.set_clock(self.tick, time);
        let (lo, hi) = self.sched.bounds();
        let report = {
            let view = self.map.clip_to_layer(lo, hi)?;
            extract_frontiers(&view, &changed, &mut self.set)
        };
        self.cache.invalidate(report.touched());
        for id in &report.removed {
            self.failures.remove(id);
            self.unexplorable.remove(id);
            self.blocked.remove(id);
        }
        clocks.frontier = ms(t0);

        let mut replan = self.active.is_none();
        if let Some(a) = &self.active {
            if a.t >= a.traj.duration() {
                replan = true;
                self.blocked.clear();
            }
            if a.t >= a.traj.duration() && !a.look_around {
                let observed = a.cells.iter().any(|c| self.map.state(*c) != Some(VoxelState::Unknown));
                if self.set.get(a.target).is_some() && !observed {
                    self.visit_failures += 1;
                    let n = self.failures.entry(a.target).or_insert(0);
                    *n += 1;
                    if *n >= self.cfg.max_visit_failures {
                        log::debug!("frontier {} given up after {} fruitless visits", a.target, n);
                        self.unexplorable.insert(a.target);
                    }
                }
            } else if a.t < a.traj.duration()
                && !a.look_around
                && (report.removed.contains(&a.target)
                    || a.cells.iter().all(|c| self.map.state(*c) != Some(VoxelState::Unknown)))
            {
                replan = true;
            }
        }

        let mut result = StepResult::Executing;
        if replan {
            self.active = None;
            match self.plan(time, &mut clocks)? {
                Some(a) => {
                    self.turns_left = 0;
                    self.active = Some(a);
                    result = StepResult::NewTrajectory;
                }
                None if self.should_look_around() => {
                    self.turns_left -= 1;
                    self.active = Some(self.turn(time));
                    result = StepResult::NewTrajectory;
                }
                None => {
                    self.close_layer();
                    result = if self.sched.is_last() { StepResult::Done } else { StepResult::LayerComplete };
                }
            }
        }

        self.record(time, &clocks);
        if result == StepResult::Done {
            self.done = Some(Termination::Done);
        } else {
            self.fly();
            self.tick += 1;
        }
        Ok(result)
    }

    /// Moves to the next layer, keeping the whole map and rebuilding the
    /// frontier set from it.
    pub fn advance_layer(&mut self) -> Result<(f64, f64), ExploreError> {
        let (lo, hi) = self.sched.advance_layer()?;
        self.set.clear();
        self.cache.clear();
        self.blocked.clear();
        self.failures.clear();
        self.unexplorable.clear();
        self.active = None;
        self.turns_left = 0;
        self.turned_at = None;
        self.carried = Some(self.map.states().to_vec());
        let view = self.map.clip_to_layer(lo, hi)?;
        extract_frontiers(&view, &view.bounds(), &mut self.set);
        self.layers.push(LayerRecord::start(self.sched.index(), lo, hi, self.tick));
        log::debug!("layer {} [{lo}, {hi}) starts with {} frontiers", self.sched.index(), self.set.len());
        Ok((lo, hi))
    }

    /// Steps until done or out of ticks.
    pub fn run(&mut self) -> Result<Termination, ExploreError> {
        loop {
            if let Some(t) = self.done {
                return Ok(t);
            }
            if self.tick >= self.cfg.max_ticks {
                log::warn!("tick budget of {} exhausted", self.cfg.max_ticks);
                self.close_layer();
                self.done = Some(Termination::TickBudgetExceeded);
                continue;
            }
            if self.step()? == StepResult::LayerComplete {
                self.advance_layer()?;
            }
        }
    }

    pub fn report(&self) -> EpisodeReport {
        let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        let block_times = BlockTimes {
            frontier_ms: mean(self.sums.frontier_ms, self.counts[0]),
            global_ms: mean(self.sums.global_ms, self.counts[1]),
            local_ms: mean(self.sums.local_ms, self.counts[2]),
            traj_ms: mean(self.sums.traj_ms, self.counts[3]),
            total_ms: 0.0,
        }
        .with_total();
        let events = &self.trace.events;
        let last = self.layers.last();
        EpisodeReport {
            planner: self.cfg.planner,
            termination: self.done,
            ticks: self.tick,
            exploration_time_s: self.time(),
            distance_m: self.distance,
            final_coverage: self.coverage(),
            reachable_voxels: self.reachable_total,
            known_reachable_voxels: self.known_reachable,
            layers: self.layers.clone(),
            plan_events: events.len(),
            planning_failures: self.planning_failures,
            visit_failures: self.visit_failures,
            final_live_frontiers: last.and_then(|l| l.remaining_frontiers).unwrap_or(self.set.len()),
            final_reachable_frontiers: last.and_then(|l| l.reachable_frontiers),
            final_unexplorable_frontiers: last.and_then(|l| l.unexplorable_frontiers),
            max_live_frontiers: events.iter().map(|e| e.live_frontiers).max().unwrap_or(0),
            max_compressed_dim: events.iter().filter_map(|e| e.compressed_dim).max(),
            block_times,
            global_timings: self.timings.clone(),
        }
    }

    fn record(&mut self, time: f64, c: &Clocks) {
        let ran = [true, c.global > 0.0, c.local > 0.0, c.traj > 0.0];
        let vals = [c.frontier, c.global, c.local, c.traj];
        for k in 0..4 {
            if ran[k] {
                self.counts[k] += 1;
            }
        }
        self.sums.frontier_ms += vals[0];
        self.sums.global_ms += vals[1];
        self.sums.local_ms += vals[2];
        self.sums.traj_ms += vals[3];
        let w = |x: f64| if self.cfg.record_wall_times { x } else { 0.0 };
        self.trace.metrics.push(TickMetrics {
            tick: self.tick,
            time_s: time,
            coverage: self.coverage(),
            distance_m: self.distance,
            t_frontier_ms: w(c.frontier),
            t_global_ms: w(c.global),
            t_local_ms: w(c.local),
            t_traj_ms: w(c.traj),
        });
    }

    /// Nothing is plannable although frontiers remain: turn a full circle in
    /// place, a third at a time, once per position. Frontiers whose
    /// surroundings were never seen have no viewpoint until then.
    fn should_look_around(&mut self) -> bool {
        if self.turns_left > 0 {
            return true;
        }
        let here = self.map.voxel_at(&self.uav.position);
        if self.set.is_empty() || self.turned_at == Some(here) {
            return false;
        }
        self.turned_at = Some(here);
        self.turns_left = 3;
        true
    }

    fn turn(&mut self, time: f64) -> Active {
        let pose = self.uav.pose();
        let step = 2.0 * std::f64::consts::PI / 3.0;
        let traj = Trajectory::from_polyline(vec![pose.position], pose.yaw, pose.yaw + step, &self.cfg.trajectory);
        log::debug!("turning in place at {:?}", pose.position);
        self.trace.segments.push(ExecutedSegment { start_time: time, executed: 0.0, trajectory: traj.clone() });
        Active { traj, t: 0.0, target: 0, cells: Vec::new(), look_around: true }
    }

    fn fly(&mut self) {
        let dt = self.cfg.dt;
        let Some(a) = &mut self.active else { return };
        let dur = a.traj.duration();
        let t0 = a.t.min(dur);
        let t1 = (a.t + dt).min(dur);
        // arc length from fine substeps; the path is a polyline so this is exact
        // up to corner rounding
        let mut prev = self.uav.position;
        for k in 1..=10 {
            let p = a.traj.sample(t0 + (t1 - t0) * k as f64 / 10.0).position;
            self.distance += (p - prev).norm();
            prev = p;
        }
        let s = a.traj.sample(t1);
        self.uav.position = s.position;
        self.uav.yaw = s.yaw;
        self.uav.speed = s.speed;
        a.t += dt;
        if let Some(seg) = self.trace.segments.last_mut() {
            seg.executed = t1;
        }
    }

    /// Bookkeeping when the active layer has nothing left to plan.
    fn close_layer(&mut self) {
        let (lo, hi) = self.sched.bounds();
        let uav = self.map.voxel_at(&self.uav.position);
        let Ok(nav) = self.map.clip_to_layer(self.map.origin().z, hi) else { return };
        let anchors: Vec<Voxel> = self.set.iter().filter_map(|f| f.anchor).collect();
        let mut field = DistanceField::new();
        field.compute(&nav, uav, &anchors, f64::INFINITY, 0.0);
        let reachable = self
            .set
            .iter()
            .filter(|f| f.anchor.is_some_and(|a| matches!(field.get(&nav, a), FieldValue::Distance(_))))
            .count();
        let unexplorable = self
            .set
            .iter()
            .filter(|f| f.viewpoints.is_empty() || self.unexplorable.contains(&f.id))
            .count();
        let rec = self.layers.last_mut().unwrap();
        if rec.end_tick.is_none() {
            rec.end_tick = Some(self.tick);
            rec.remaining_frontiers = Some(self.set.len());
            rec.reachable_frontiers = Some(reachable);
            rec.unexplorable_frontiers = Some(unexplorable);
            log::debug!(
                "layer [{lo}, {hi}) closed at tick {}: {} frontiers left, {reachable} reachable",
                self.tick,
                self.set.len()
            );
        }
    }

    fn plan(&mut self, time: f64, clocks: &mut Clocks) -> Result<Option<Active>, ExploreError> {
        let cfg = &self.cfg;
        let (lo, hi) = self.sched.bounds();
        let view = self.map.clip_to_layer(lo, hi)?;
        let nav = self.map.clip_to_layer(self.map.origin().z, hi)?;

        let t0 = Instant::now();
        self.set.refresh_viewpoints(&view, &cfg.sensor, &cfg.frontier.viewpoints);
        clocks.frontier += ms(t0);

        let t0 = Instant::now();
        let pose = self.uav.pose();
        let start = self.map.voxel_at(&pose.position);
        let plannable = |f: &Frontier, blocked: &BTreeSet<u64>| {
            !f.viewpoints.is_empty() && !self.unexplorable.contains(&f.id) && !blocked.contains(&f.id)
        };
        let mut targets: Vec<Voxel> = Vec::new();
        for f in self.set.iter().filter(|f| plannable(f, &self.blocked)) {
            targets.extend(f.anchor);
            targets.extend(f.viewpoints.iter().map(|c| self.map.voxel_at(&c.position)));
        }
        self.field.compute(&nav, start, &targets, cfg.frontier.field_radius, 1.0);
        let factor = cfg.frontier.unreachable_factor;
        let budget = cfg.frontier.search_budget;
        let mut metric = NavMetric {
            view: nav,
            field: &self.field,
            cache: &mut self.cache,
            uav: pose.position,
            unreachable_factor: factor,
            search_budget: budget,
        };
        if cfg.planner == PlannerKind::GoFeap {
            update_info(&mut self.set, &mut metric, cfg.omission.s_near);
        }
        clocks.global += ms(t0);

        loop {
            let cands: Vec<&Frontier> = self.set.iter().filter(|f| plannable(f, &self.blocked)).collect();
            if cands.is_empty() {
                if !self.blocked.is_empty() {
                    self.planning_failures += 1;
                    log::warn!("no trajectory to any of {} remaining frontiers", self.blocked.len());
                }
                return Ok(None);
            }
            let live = cands.len();
            let d = match cfg.planner {
                PlannerKind::GoFeap => {
                    if self.timings.len() < cfg.global_timing_samples && live > cfg.omission.x_near + 1 {
                        let mut c1 = PairCache::default();
                        let mut m1 = NavMetric {
                            view: nav,
                            field: &self.field,
                            cache: &mut c1,
                            uav: pose.position,
                            unreachable_factor: factor,
                            search_budget: budget,
                        };
                        let s = Instant::now();
                        let p1 = plan_global(&cands, time, &mut m1, &cfg.omission)?;
                        let compressed_ms = ms(s);
                        let mut c2 = PairCache::default();
                        let mut m2 = NavMetric { cache: &mut c2, ..m1 };
                        let s = Instant::now();
                        plan_global_full(&cands, time, &mut m2, &cfg.omission)?;
                        let full_ms = ms(s);
                        self.timings.push(GlobalTiming {
                            tick: self.tick,
                            live,
                            compressed_dim: p1.matrix.size(),
                            compressed_ms,
                            full_ms,
                        });
                    }
                    let t0 = Instant::now();
                    let plan = plan_global(&cands, time, &mut metric, &cfg.omission)?;
                    clocks.global += ms(t0);

                    let t0 = Instant::now();
                    let mean = self.window.mean();
                    let mut layers: Vec<(u64, Vec<ViewpointCandidate>)> = Vec::new();
                    let mut all_first: Vec<ViewpointCandidate> = Vec::new();
                    for (k, id) in plan.order().iter().take(cfg.local.dag_depth).enumerate() {
                        let f = cands.iter().find(|f| f.id == *id).unwrap();
                        let sc = classify_scenario(metric.from_pose(f), mean, &cfg.local);
                        let costed: Vec<ViewpointCandidate> = f
                            .viewpoints
                            .iter()
                            .map(|c| {
                                let d = field_distance(&self.field, &nav, &pose.position, &c.position, factor);
                                c.clone().with_costs(pose.yaw, d)
                            })
                            .collect();
                        if k == 0 {
                            all_first = costed.clone();
                        }
                        layers.push((*id, filter_viewpoints(&costed, sc, cfg.local.keep)));
                    }
                    let g = build_viewpoint_dag(
                        &layers,
                        cfg.local.dag_depth,
                        cfg.trajectory.v_max,
                        cfg.trajectory.yaw_rate_max,
                        |a, b| path_distance(&nav, a, b, budget, factor),
                    )?;
                    let path = shortest_local_path(&g)?;
                    let mut tries = vec![path.first];
                    tries.extend(layers[0].1.iter().cloned());
                    tries.extend(all_first);
                    clocks.local += ms(t0);
                    let importance = plan.matrix.id_map.iter().map(|&id| (id, plan.matrix.outgoing(id))).collect();
                    Decision {
                        importance,
                        target: plan.order()[0],
                        order: plan.order().to_vec(),
                        tries,
                        compressed_dim: Some(plan.matrix.size()),
                        dump: self.dumps.then(|| PlanDump {
                            tick: self.tick,
                            matrix: plan.matrix.clone(),
                            tour: plan.tour.clone(),
                        }),
                    }
                }
                PlannerKind::Nearest | PlannerKind::Fov => {
                    let t0 = Instant::now();
                    let g = if cfg.planner == PlannerKind::Nearest {
                        baseline_nearest(&cands, &mut metric)
                    } else {
                        baseline_fov(&pose, &cands, &cfg.sensor, &mut metric)
                    }
                    .expect("candidates have viewpoints");
                    let f = cands.iter().find(|f| f.id == g.frontier).unwrap();
                    let mut tries = vec![g.viewpoint];
                    tries.extend(f.viewpoints.iter().cloned());
                    clocks.global += ms(t0);
                    Decision {
                        target: g.frontier,
                        order: vec![g.frontier],
                        tries,
                        compressed_dim: None,
                        dump: None,
                        importance: Vec::new(),
                    }
                }
            };

            let t0 = Instant::now();
            let mut seen: Vec<Vec3> = Vec::new();
            let mut found = None;
            for c in d.tries.iter() {
                if seen.iter().any(|p| (p - c.position).norm() < 1e-9) {
                    continue;
                }
                seen.push(c.position);
                if seen.len() > cfg.local.keep + 1 {
                    break;
                }
                let goal = Pose { position: c.position, yaw: c.yaw };
                if let Ok(t) = generate_trajectory(&pose, &goal, &nav, &cfg.trajectory) {
                    found = Some((t, c.position));
                    break;
                }
            }
            clocks.traj += ms(t0);

            let Some((traj, vp)) = found else {
                log::debug!("frontier {} has no reachable viewpoint", d.target);
                self.blocked.insert(d.target);
                continue;
            };
            let cells = cands.iter().find(|f| f.id == d.target).unwrap().cells.clone();
            for (id, costs) in d.importance {
                if let Some(f) = self.set.get_mut(id) {
                    f.importance_costs = costs;
                }
            }
            self.trace.events.push(PlanEvent {
                tick: self.tick,
                time_s: time,
                layer: self.sched.index(),
                z_lo: lo,
                z_hi: hi,
                target: d.target,
                order: d.order,
                viewpoint: vp,
                live_frontiers: live,
                compressed_dim: d.compressed_dim,
            });
            if let Some(dump) = d.dump {
                self.trace.dumps.push(dump);
            }
            self.trace.segments.push(ExecutedSegment { start_time: time, executed: 0.0, trajectory: traj.clone() });
            return Ok(Some(Active { traj, t: 0.0, target: d.target, cells, look_around: false }));
        }
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Path distance from the vehicle read off the distance field.
fn field_distance(field: &DistanceField, nav: &LayerView, from: &Vec3, to: &Vec3, factor: f64) -> f64 {
    let e = (to - from).norm() * factor;
    match field.get(nav, nav.map().voxel_at(to)) {
        FieldValue::Distance(d) => d,
        FieldValue::Unreachable => e,
        FieldValue::AtLeast(r) => e.max(r),
    }
}

/// Budgeted grid path distance between two points.
fn path_distance(nav: &LayerView, a: &Vec3, b: &Vec3, budget: usize, factor: f64) -> f64 {
    let e = (a - b).norm() * factor;
    let q = AstarQuery { bound: f64::INFINITY, max_expansions: budget, no_corner_cutting: false };
    match bounded_distance(nav, a, b, &q) {
        Ok(SearchOutcome::Found(d)) => d,
        Ok(SearchOutcome::Exhausted(lb)) | Ok(SearchOutcome::Beyond(lb)) => e.max(lb),
        _ => e,
    }
}

/// Runs one episode to completion.
pub fn run_episode(world: &WorldModel, cfg: &ExplorationConfig) -> Result<(EpisodeReport, EpisodeTrace), ExploreError> {
    let mut ex = Explorer::new(world, cfg.clone())?;
    ex.run()?;
    let report = ex.report();
    Ok((report, ex.into_trace()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_bounds_go_upward() {
        let mut s = LayerSchedule::new(3.0, 9.0).unwrap();
        assert_eq!(s.bounds(), (0.0, 3.0));
        assert_eq!(s.advance_layer().unwrap(), (3.0, 6.0));
        assert_eq!(s.advance_layer().unwrap(), (6.0, 9.0));
        assert!(s.is_last());
        assert!(matches!(s.advance_layer(), Err(ExploreError::AtMaxHeight)));
        assert_eq!(s.index(), 2);
    }

    #[test]
    fn last_layer_is_clamped() {
        let mut s = LayerSchedule::new(3.0, 4.0).unwrap();
        assert!(!s.is_last());
        assert_eq!(s.advance_layer().unwrap(), (3.0, 4.0));
        assert!(s.is_last());
        assert!(LayerSchedule::new(0.0, 4.0).is_err());
    }

    #[test]
    fn planner_names_round_trip() {
        for k in [PlannerKind::GoFeap, PlannerKind::Nearest, PlannerKind::Fov] {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), k.name());
        }
        assert!("greedy".parse::<PlannerKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ExplorationConfig::default().validate().is_ok());
        let mut c = ExplorationConfig::default();
        c.trajectory.v_max = 3.0;
        assert!(c.validate().is_err());
        let c = ExplorationConfig { max_visit_failures: 0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = ExplorationConfig { z_max: Some(-1.0), ..Default::default() };
        assert!(c.validate().is_err());
    }
}
