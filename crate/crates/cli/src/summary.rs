//! Per-seed raw rows and the Avg/Std/Max/Min summaries built from them.

use serde::{Deserialize, Serialize};

use strata_core::explore::{BlockTimes, EpisodeReport};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub avg: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Option<Stats> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let avg = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        Some(Stats { avg, std, max, min })
    }
}

/// One episode of a comparison. Failed episodes carry the error and no numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub method: String,
    pub world: String,
    pub seed: u64,
    pub status: String,
    pub exploration_time_s: Option<f64>,
    pub distance_m: Option<f64>,
    pub final_coverage: Option<f64>,
    pub ticks: Option<u64>,
    pub frontier_ms: Option<f64>,
    pub global_ms: Option<f64>,
    pub local_ms: Option<f64>,
    pub traj_ms: Option<f64>,
    pub error: String,
}

impl RawRow {
    pub fn ok(method: &str, seed: u64, r: &EpisodeReport) -> Self {
        let status = match r.termination {
            Some(t) => serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
            None => String::new(),
        };
        let b = r.block_times;
        RawRow {
            method: method.to_owned(),
            world: String::new(),
            seed,
            status,
            exploration_time_s: Some(r.exploration_time_s),
            distance_m: Some(r.distance_m),
            final_coverage: Some(r.final_coverage),
            ticks: Some(r.ticks),
            frontier_ms: Some(b.frontier_ms),
            global_ms: Some(b.global_ms),
            local_ms: Some(b.local_ms),
            traj_ms: Some(b.traj_ms),
            error: String::new(),
        }
    }

    pub fn failed(method: &str, seed: u64, error: String) -> Self {
        RawRow {
            method: method.to_owned(),
            world: String::new(),
            seed,
            status: "failed".into(),
            exploration_time_s: None,
            distance_m: None,
            final_coverage: None,
            ticks: None,
            frontier_ms: None,
            global_ms: None,
            local_ms: None,
            traj_ms: None,
            error,
        }
    }

    fn block_times(&self) -> Option<BlockTimes> {
        Some(BlockTimes {
            frontier_ms: self.frontier_ms?,
            global_ms: self.global_ms?,
            local_ms: self.local_ms?,
            traj_ms: self.traj_ms?,
            total_ms: 0.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub world: String,
    pub episodes: usize,
    pub failed: usize,
    pub time_avg: Option<f64>,
    pub time_std: Option<f64>,
    pub time_max: Option<f64>,
    pub time_min: Option<f64>,
    pub distance_avg: Option<f64>,
    pub distance_std: Option<f64>,
    pub distance_max: Option<f64>,
    pub distance_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub method: String,
    pub frontier_ms: f64,
    pub global_ms: f64,
    pub local_ms: f64,
    pub traj_ms: f64,
    pub total_ms: f64,
}

/// Methods in order of first appearance.
fn methods(rows: &[RawRow]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for r in rows {
        if !out.contains(&r.method.as_str()) {
            out.push(&r.method);
        }
    }
    out
}

pub fn summarize(rows: &[RawRow]) -> Vec<SummaryRow> {
    methods(rows)
        .into_iter()
        .map(|m| {
            let mine: Vec<&RawRow> = rows.iter().filter(|r| r.method == m).collect();
            let times: Vec<f64> = mine.iter().filter_map(|r| r.exploration_time_s).collect();
            let dists: Vec<f64> = mine.iter().filter_map(|r| r.distance_m).collect();
            let t = Stats::of(&times);
            let d = Stats::of(&dists);
            SummaryRow {
                method: m.to_owned(),
                world: mine[0].world.clone(),
                episodes: mine.len(),
                failed: mine.iter().filter(|r| r.exploration_time_s.is_none()).count(),
                time_avg: t.map(|s| s.avg),
                time_std: t.map(|s| s.std),
                time_max: t.map(|s| s.max),
                time_min: t.map(|s| s.min),
                distance_avg: d.map(|s| s.avg),
                distance_std: d.map(|s| s.std),
                distance_max: d.map(|s| s.max),
                distance_min: d.map(|s| s.min),
            }
        })
        .collect()
}

/// Mean of the per-episode block averages, per method.
pub fn block_table(rows: &[RawRow]) -> Vec<BlockRow> {
    methods(rows)
        .into_iter()
        .filter_map(|m| {
            let bs: Vec<BlockTimes> = rows.iter().filter(|r| r.method == m).filter_map(RawRow::block_times).collect();
            if bs.is_empty() {
                return None;
            }
            let n = bs.len() as f64;
            let mean = |f: fn(&BlockTimes) -> f64| bs.iter().map(f).sum::<f64>() / n;
            let b = BlockTimes {
                frontier_ms: mean(|b| b.frontier_ms),
                global_ms: mean(|b| b.global_ms),
                local_ms: mean(|b| b.local_ms),
                traj_ms: mean(|b| b.traj_ms),
                total_ms: 0.0,
            }
            .with_total();
            Some(BlockRow {
                method: m.to_owned(),
                frontier_ms: b.frontier_ms,
                global_ms: b.global_ms,
                local_ms: b.local_ms,
                traj_ms: b.traj_ms,
                total_ms: b.total_ms,
            })
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}
