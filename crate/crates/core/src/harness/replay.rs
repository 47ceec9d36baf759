//! SVG rendering of episode traces.
//!
//! Frames use world coordinates directly: the drawing is wrapped in a
//! `scale(1,-1)` group so that `+y` points up, and every coordinate is
//! written with millimetre precision.

use super::config::Config;
use super::episode::Scenario;
use super::trace::EpisodeTrace;
use crate::error::{Error, Result};
use crate::sim::{Frenet, RoadNetwork, Vec2, VehicleState};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Half-size of the square window around the ego in each frame, m.
const VIEW_HALF: f64 = 40.0;
const ROAD_SAMPLE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayFiles {
    pub frames: Vec<PathBuf>,
    pub summary: PathBuf,
}

fn fmt_points(points: impl IntoIterator<Item = Vec2>) -> String {
    let mut s = String::new();
    for (k, p) in points.into_iter().enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", p.x, p.y);
    }
    s
}

/// Parses an SVG `points` attribute.
pub fn parse_points(attr: &str) -> Option<Vec<Vec2>> {
    attr.split_whitespace()
        .map(|pair| {
            let (x, y) = pair.split_once(',')?;
            Some(Vec2::new(x.parse().ok()?, y.parse().ok()?))
        })
        .collect()
}

/// Points of the polyline with the given `id` in an SVG document.
pub fn polyline_points(svg: &str, id: &str) -> Option<Vec<Vec2>> {
    let tag = format!("id=\"{id}\"");
    let start = svg.find(&tag)?;
    let rest = &svg[start..];
    let p = rest.find("points=\"")? + "points=\"".len();
    let end = rest[p..].find('"')?;
    parse_points(&rest[p..p + end])
}

fn road_lines(net: &RoadNetwork, s0: f64, s1: f64) -> Vec<(Vec<Vec2>, bool)> {
    let s0 = s0.max(0.0);
    let s1 = s1.min(net.route_length());
    if s1 <= s0 {
        return Vec::new();
    }
    let count = ((s1 - s0) / ROAD_SAMPLE).ceil() as usize + 1;
    let samples: Vec<f64> = (0..count).map(|k| (s0 + k as f64 * ROAD_SAMPLE).min(s1)).collect();
    let half = 0.5 * net.lane_count as f64 * net.lane_width;
    (0..=net.lane_count)
        .map(|k| {
            let d = half - k as f64 * net.lane_width;
            let edge = k == 0 || k == net.lane_count;
            let line = samples.iter().map(|&s| net.to_world(Frenet::new(s, d)).position).collect();
            (line, edge)
        })
        .collect()
}

fn vehicle_polygon(v: &VehicleState, class: &str, out: &mut String) {
    let pts = fmt_points(v.footprint().corners());
    let _ = writeln!(out, r##"<polygon class="{class}" data-id="{}" points="{pts}"/>"##, v.id);
}

/// One frame: road around the ego, all vehicles and the ego path so far.
pub fn render_frame(trace: &EpisodeTrace, net: &RoadNetwork, index: usize) -> String {
    let rec = &trace.steps[index];
    let c = rec.ego.position;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="800" height="800">"##,
        c.x - VIEW_HALF,
        -c.y - VIEW_HALF,
        2.0 * VIEW_HALF,
        2.0 * VIEW_HALF
    );
    let _ = writeln!(out, r##"<g transform="scale(1,-1)">"##);
    for (line, edge) in road_lines(net, rec.ego.frenet.s - 2.0 * VIEW_HALF, rec.ego.frenet.s + 2.0 * VIEW_HALF) {
        let style = if edge { "stroke:#333;stroke-width:0.3" } else { "stroke:#999;stroke-width:0.15;stroke-dasharray:2,2" };
        let _ = writeln!(out, r##"<polyline fill="none" style="{style}" points="{}"/>"##, fmt_points(line));
    }
    for (sv, frozen) in rec.surrounding.iter().zip(&rec.frozen) {
        vehicle_polygon(sv, if *frozen { "sv frozen" } else { "sv" }, &mut out);
    }
    vehicle_polygon(&rec.ego, "ego", &mut out);
    let path = fmt_points(trace.steps[..=index].iter().map(|r| r.ego.position));
    let _ = writeln!(
        out,
        r##"<polyline id="ego-path" fill="none" style="stroke:#c00;stroke-width:0.2" points="{path}"/>"##
    );
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r##"<text x="{:.3}" y="{:.3}" font-size="2">step {} t={:.1}s v={:.2}</text>"##,
        c.x - VIEW_HALF + 1.0,
        -c.y - VIEW_HALF + 3.0,
        rec.step,
        rec.time,
        rec.ego.speed
    );
    out.push_str("</svg>\n");
    out
}

/// Summary plot of ego speed and minimum gap against time.
pub fn render_summary(trace: &EpisodeTrace) -> String {
    let (w, h) = (600.0, 300.0);
    let t_max = trace.steps.last().map_or(1.0, |r| r.time).max(1e-9);
    let finite_gap = |g: f64| if g.is_finite() { g } else { 0.0 };
    let y_max = trace
        .steps
        .iter()
        .flat_map(|r| [r.ego.speed.abs(), finite_gap(r.min_gap)])
        .fold(1.0, f64::max);
    let scale = |t: f64, y: f64| Vec2::new(t / t_max * w, h - y / y_max * h);
    let speed = fmt_points(trace.steps.iter().map(|r| scale(r.time, r.ego.speed)));
    let gap = fmt_points(trace.steps.iter().map(|r| scale(r.time, finite_gap(r.min_gap))));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-40 -20 {} {}" width="{}" height="{}">"##,
        w + 60.0,
        h + 50.0,
        w + 60.0,
        h + 50.0
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="none" stroke="#333"/>"##);
    let _ = writeln!(out, r##"<polyline id="ego-speed" fill="none" stroke="#06c" points="{speed}"/>"##);
    let _ = writeln!(out, r##"<polyline id="min-gap" fill="none" stroke="#c60" points="{gap}"/>"##);
    let _ = writeln!(out, r##"<text x="0" y="-6" font-size="12">ego speed (m/s, blue), min gap (m, orange); t max {t_max:.1}s, y max {y_max:.1}</text>"##);
    out.push_str("</svg>\n");
    out
}

/// Rebuilds the road network recorded in a trace header.
pub fn trace_network(trace: &EpisodeTrace) -> Result<RoadNetwork> {
    let cfg: Config = serde_json::from_value(trace.header.config.clone())?;
    Ok(Scenario::new(cfg)?.network)
}

/// Writes one SVG frame per step plus `summary.svg` into `out_dir`.
pub fn render_replay(trace: &EpisodeTrace, out_dir: &Path) -> Result<ReplayFiles> {
    let net = trace_network(trace)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut frames = Vec::with_capacity(trace.steps.len());
    for i in 0..trace.steps.len() {
        let path = out_dir.join(format!("frame_{:05}.svg", i + 1));
        std::fs::write(&path, render_frame(trace, &net, i)).map_err(|e| Error::io(&path, e))?;
        frames.push(path);
    }
    let summary = out_dir.join("summary.svg");
    std::fs::write(&summary, render_summary(trace)).map_err(|e| Error::io(&summary, e))?;
    Ok(ReplayFiles { frames, summary })
}
