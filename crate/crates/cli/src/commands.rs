//! The `run`, `compare` and `gen-world` commands.

use std::path::{Path, PathBuf};

use anyhow::Context;
use thiserror::Error;

use strata_core::explore::{metrics_csv, EpisodeReport, EpisodeTrace, ExplorationConfig, Explorer, PlannerKind};
use strata_core::sim::{generate_maze, generate_plant, WorldFile, WorldModel};

use crate::config::{maze_dims, maze_resolution, plant_dims, plant_resolution, ConfigError, ScenarioConfig};
use crate::output::write_atomic;
use crate::summary::{block_table, summarize, to_csv, RawRow};
use crate::svg::{coverage_svg, flown_path, trajectory_svg, Series};

/// Failures mapped to process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("episode failed: {0:#}")]
    Episode(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Episode(_) => 2,
        }
    }
}

pub struct Episode {
    pub report: EpisodeReport,
    pub trace: EpisodeTrace,
}

pub fn run_one(world: &WorldModel, cfg: &ExplorationConfig, dumps: bool) -> anyhow::Result<Episode> {
    let mut ex = Explorer::new(world, cfg.clone())?;
    if dumps {
        ex.enable_dumps();
    }
    ex.run()?;
    let report = ex.report();
    Ok(Episode { report, trace: ex.into_trace() })
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
    let p = dir.join(name);
    write_atomic(&p, bytes).with_context(|| format!("writing {}", p.display()))
}

fn trajectory_csv(trace: &EpisodeTrace) -> String {
    let mut out = String::from("t,x,y,z\n");
    for (t, p) in flown_path(&trace.segments, 0.1) {
        out.push_str(&format!("{t:.4},{:.4},{:.4},{:.4}\n", p.x, p.y, p.z));
    }
    out
}

/// Writes every per-episode artifact into `dir`. `source` names where the
/// world came from and is stored in report.json.
pub fn write_episode(
    dir: &Path,
    world: &WorldModel,
    source: &str,
    ep: &Episode,
    label: &str,
    dumps: bool,
) -> anyhow::Result<()> {
    write(dir, "metrics.csv", metrics_csv(&ep.trace.metrics).as_bytes())?;
    let mut report = serde_json::to_value(&ep.report)?;
    if let Some(o) = report.as_object_mut() {
        o.insert("world".into(), source.into());
    }
    write(dir, "report.json", (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    write(dir, "trajectory.csv", trajectory_csv(&ep.trace).as_bytes())?;
    write(dir, "trajectory.svg", trajectory_svg(world, &ep.trace.segments).as_bytes())?;
    let series = [Series { label: label.to_owned(), metrics: &ep.trace.metrics }];
    write(dir, "coverage.svg", coverage_svg(&series).as_bytes())?;
    if dumps {
        write(dir, "plan_dumps.json", (serde_json::to_string_pretty(&ep.trace.dumps)? + "\n").as_bytes())?;
        write(dir, "plan_events.json", (serde_json::to_string_pretty(&ep.trace.events)? + "\n").as_bytes())?;
    }
    Ok(())
}

fn build_world(cfg: &ScenarioConfig, path: &Path, offset: u64) -> Result<WorldModel, ConfigError> {
    cfg.world.build(offset).map_err(|e| ConfigError::Invalid { path: path.to_path_buf(), message: e.to_string() })
}

pub fn cmd_run(config: &Path, out: Option<&Path>, dumps: bool) -> Result<PathBuf, CliError> {
    let cfg = ScenarioConfig::load(config)?;
    let world = build_world(&cfg, config, 0)?;
    let dir = cfg.output_dir(out);
    let ep = run_one(&world, &cfg.exploration, dumps).map_err(CliError::Episode)?;
    write_episode(&dir, &world, &cfg.world.describe(), &ep, cfg.exploration.planner.name(), dumps).map_err(CliError::Episode)?;
    log::info!(
        "{}: coverage {:.4}, {:.1} s, {:.1} m -> {}",
        cfg.exploration.planner.name(),
        ep.report.final_coverage,
        ep.report.exploration_time_s,
        ep.report.distance_m,
        dir.display()
    );
    Ok(dir)
}

pub fn parse_methods(s: &str) -> Result<Vec<PlannerKind>, CliError> {
    let mut out = Vec::new();
    for m in s.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let k: PlannerKind = m.parse().map_err(CliError::Usage)?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    Ok(out)
}

/// Runs every method on every seed. Per-episode failures are recorded in
/// `raw.csv`; the command fails only when no episode succeeds.
pub fn cmd_compare(
    config: &Path,
    methods: &[PlannerKind],
    seeds: u64,
    out: Option<&Path>,
    dumps: bool,
) -> Result<PathBuf, CliError> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let cfg = ScenarioConfig::load(config)?;
    if !cfg.world.is_generated() && seeds > 1 {
        log::warn!("world is a file: every seed repeats the same episode");
    }
    let worlds: Vec<WorldModel> = (0..seeds).map(|k| build_world(&cfg, config, k)).collect::<Result<_, _>>()?;
    let dir = cfg.output_dir(out);
    let source = cfg.world.describe();
    let mut rows = Vec::new();
    let mut curves: Vec<(String, EpisodeTrace)> = Vec::new();
    for &m in methods {
        for (k, world) in worlds.iter().enumerate() {
            let seed = k as u64;
            let mut ec = cfg.exploration.clone();
            ec.planner = m;
            let sub = dir.join(m.name()).join(format!("seed_{seed}"));
            let res = run_one(world, &ec, dumps).and_then(|ep| {
                write_episode(&sub, world, &source, &ep, &format!("{} seed {seed}", m.name()), dumps)?;
                Ok(ep)
            });
            match res {
                Ok(ep) => {
                    log::info!("{} seed {seed}: {:.1} s, {:.1} m", m.name(), ep.report.exploration_time_s, ep.report.distance_m);
                    rows.push(RawRow { world: source.clone(), ..RawRow::ok(m.name(), seed, &ep.report) });
                    curves.push((format!("{} seed {seed}", m.name()), ep.trace));
                }
                Err(e) => {
                    log::error!("{} seed {seed} failed: {e:#}", m.name());
                    rows.push(RawRow { world: source.clone(), ..RawRow::failed(m.name(), seed, format!("{e:#}")) });
                }
            }
        }
    }
    let csv = |e: csv::Error| CliError::Episode(e.into());
    let io = CliError::Episode;
    write(&dir, "raw.csv", to_csv(&rows).map_err(csv)?.as_bytes()).map_err(io)?;
    write(&dir, "summary.csv", to_csv(&summarize(&rows)).map_err(csv)?.as_bytes()).map_err(io)?;
    write(&dir, "block_times.csv", to_csv(&block_table(&rows)).map_err(csv)?.as_bytes()).map_err(io)?;
    let series: Vec<Series> = curves.iter().map(|(l, t)| Series { label: l.clone(), metrics: &t.metrics }).collect();
    write(&dir, "coverage.svg", coverage_svg(&series).as_bytes()).map_err(io)?;
    if curves.is_empty() {
        return Err(CliError::Episode(anyhow::anyhow!("all {} episodes failed", rows.len())));
    }
    Ok(dir)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorldKind {
    Maze,
    Plant,
}

pub fn cmd_gen_world(
    kind: WorldKind,
    dims: Option<[f64; 3]>,
    resolution: Option<f64>,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let bad = |e: strata_core::sim::SimError| CliError::Usage(e.to_string());
    let w = match kind {
        WorldKind::Maze => {
            generate_maze(dims.unwrap_or_else(maze_dims), resolution.unwrap_or_else(maze_resolution), seed).map_err(bad)?
        }
        WorldKind::Plant => {
            generate_plant(dims.unwrap_or_else(plant_dims), resolution.unwrap_or_else(plant_resolution), seed)
                .map_err(bad)?
        }
    };
    let text = serde_json::to_string(&WorldFile::from_world(&w)).map_err(|e| CliError::Episode(e.into()))? + "\n";
    write_atomic(out, text.as_bytes())
        .with_context(|| format!("writing {}", out.display()))
        .map_err(CliError::Episode)?;
    Ok(())
}
