//! Hand-written SVG plots: top-down trajectory and coverage curves.

use std::fmt::Write;

use strata_core::explore::{ExecutedSegment, TickMetrics};
use strata_core::geom::Vec3;
use strata_core::sim::WorldModel;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Blue to yellow through green; `u` in [0, 1].
fn time_color(u: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 3] = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let u = u.clamp(0.0, 1.0);
    let k = if u <= 0.5 { 0 } else { 1 };
    let (u0, c0) = STOPS[k];
    let (u1, c1) = STOPS[k + 1];
    let w = (u - u0) / (u1 - u0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + (c1[i] - c0[i]) * w).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Flown positions with absolute times, sampled every `step` seconds.
pub fn flown_path(segments: &[ExecutedSegment], step: f64) -> Vec<(f64, Vec3)> {
    let mut out = Vec::new();
    for s in segments {
        let n = (s.executed / step).ceil() as usize;
        for k in 0..=n {
            let t = (k as f64 * step).min(s.executed);
            out.push((s.start_time + t, s.trajectory.sample(t).position));
        }
    }
    out
}

/// Top-down view: obstacle footprint at spawn height and the path colored by time.
pub fn trajectory_svg(world: &WorldModel, segments: &[ExecutedSegment]) -> String {
    let dims = world.dims();
    let res = world.resolution;
    let (wx, wy) = (dims[0] as f64 * res, dims[1] as f64 * res);
    let scale = 800.0 / wx.max(wy);
    let (w, h) = (wx * scale, wy * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        w,
        h + 30.0,
        w,
        h + 30.0
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.2}" height="{h:.2}" fill="#ffffff" stroke="#000000"/>"##);
    let kz = world.voxel_at(&world.spawn.position).z.clamp(0, dims[2] as i32 - 1);
    let _ = writeln!(s, r##"<g fill="#9e9e9e">"##);
    for y in 0..dims[1] as i32 {
        let mut x = 0;
        while x < dims[0] as i32 {
            if !world.is_occupied(strata_core::voxel::Voxel::new(x, y, kz)) {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < dims[0] as i32 && world.is_occupied(strata_core::voxel::Voxel::new(x, y, kz)) {
                x += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
                x0 as f64 * res * scale,
                h - (y + 1) as f64 * res * scale,
                (x - x0) as f64 * res * scale,
                res * scale
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let path = flown_path(segments, 0.1);
    let t_end = path.last().map(|p| p.0).unwrap_or(0.0).max(1e-9);
    let to_px = |p: &Vec3| (p.x * scale, h - p.y * scale);
    const BINS: usize = 32;
    let mut i = 0;
    while i + 1 < path.len() {
        let bin = ((path[i].0 / t_end) * BINS as f64).floor().min((BINS - 1) as f64) as usize;
        let mut pts = vec![to_px(&path[i].1)];
        while i + 1 < path.len() {
            i += 1;
            pts.push(to_px(&path[i].1));
            let b = ((path[i].0 / t_end) * BINS as f64).floor().min((BINS - 1) as f64) as usize;
            if b != bin {
                break;
            }
        }
        let color = time_color((bin as f64 + 0.5) / BINS as f64);
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
    }
    if let (Some(a), Some(b)) = (path.first(), path.last()) {
        let (ax, ay) = to_px(&a.1);
        let (bx, by) = to_px(&b.1);
        let _ = writeln!(s, r##"<circle cx="{ax:.2}" cy="{ay:.2}" r="5" fill="{}"/>"##, time_color(0.0));
        let _ = writeln!(s, r##"<circle cx="{bx:.2}" cy="{by:.2}" r="5" fill="{}"/>"##, time_color(1.0));
    }
    let _ = writeln!(
        s,
        r##"<text x="4" y="{:.2}" font-family="sans-serif" font-size="14">path colored by time, 0 to {:.1} s</text>"##,
        h + 20.0,
        t_end
    );
    s.push_str("</svg>\n");
    s
}

/// Coverage curves of several runs: (label, per-tick metrics).
pub struct Series<'a> {
    pub label: String,
    pub metrics: &'a [TickMetrics],
}

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

fn panel(s: &mut String, x0: f64, series: &[Series], x_of: fn(&TickMetrics) -> f64, xlabel: &str) {
    let (pw, ph, top) = (420.0, 300.0, 20.0);
    let xmax = nice_max(series.iter().flat_map(|r| r.metrics.iter().map(x_of)).fold(0.0, f64::max));
    let px = |x: f64| x0 + x / xmax * pw;
    let py = |c: f64| top + (1.0 - c) * ph;
    let _ = writeln!(s, r##"<rect x="{x0:.2}" y="{top:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#000000"/>"##);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"##,
            px(f * xmax),
            top + ph + 15.0,
            fmt_tick(f * xmax)
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"##,
            x0 - 4.0,
            py(f) + 4.0,
            f
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{xlabel}</text>"##,
        x0 + pw / 2.0,
        top + ph + 34.0
    );
    for (i, r) in series.iter().enumerate() {
        let pts: Vec<String> = r.metrics.iter().map(|m| format!("{:.2},{:.2}", px(x_of(m)), py(m.coverage))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
}

fn fmt_tick(v: f64) -> String {
    if v.fract().abs() < 1e-9 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Coverage against time (left) and against flight distance (right).
pub fn coverage_svg(series: &[Series]) -> String {
    let legend_h = 18.0 * series.len() as f64;
    let (w, h) = (1000.0, 380.0 + legend_h);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#);
    panel(&mut s, 50.0, series, |m| m.time_s, "time (s)");
    panel(&mut s, 550.0, series, |m| m.distance_m, "flight distance (m)");
    for (i, r) in series.iter().enumerate() {
        let y = 375.0 + 18.0 * i as f64;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<line x1="50" y1="{:.2}" x2="80" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#, y - 4.0, y - 4.0);
        let _ = writeln!(s, r#"<text x="86" y="{y:.2}" font-family="sans-serif" font-size="12">{}</text>"#, escape(&r.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_ends() {
        assert_eq!(time_color(0.0), "#440154");
        assert_eq!(time_color(1.0), "#fde725");
        assert_eq!(time_color(0.5), "#21918c");
    }

    #[test]
    fn nice_axis_limits() {
        assert_eq!(nice_max(0.0), 1.0);
        assert_eq!(nice_max(7.3), 10.0);
        assert_eq!(nice_max(180.0), 200.0);
        assert_eq!(nice_max(0.22), 0.25);
    }

    #[test]
    fn coverage_plot_has_one_curve_per_panel_and_series() {
        let m: Vec<TickMetrics> = (0..5)
            .map(|k| TickMetrics {
                tick: k,
                time_s: k as f64,
                coverage: k as f64 / 4.0,
                distance_m: 2.0 * k as f64,
                t_frontier_ms: 0.0,
                t_global_ms: 0.0,
                t_local_ms: 0.0,
                t_traj_ms: 0.0,
            })
            .collect();
        let sv = coverage_svg(&[Series { label: "a<b".into(), metrics: &m }, Series { label: "c".into(), metrics: &m }]);
        assert_eq!(sv.matches("<polyline").count(), 4);
        assert!(sv.contains("a&lt;b"));
        assert!(sv.ends_with("</svg>\n"));
    }
}
