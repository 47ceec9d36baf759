//! Parametric road networks built from chained blocks.
//!
//! Every network has one through route: a tangent-continuous reference line made
//! of straight and circular pieces. Route lanes are constant lateral offsets of
//! that line, so Frenet coordinates `(s, d)` are exact: `s` is arc length along the
//! reference, `d` is the signed offset (positive to the left). Junction arms and
//! merge ramps are additional lanes in the connectivity graph.

use super::geometry::{wrap_angle, Vec2};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_LANE_WIDTH: f64 = 3.5;
const SAMPLE_SPACING: f64 = 2.0;
const BRANCH_LENGTH: f64 = 40.0;
const RAMP_FRACTION: f64 = 0.7;
const DESTINATION_MARGIN: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Straight,
    Merge,
    Intersection,
    TIntersection,
    Circular,
    Roundabout,
}

impl BlockKind {
    pub const ALL: [BlockKind; 6] = [
        BlockKind::Straight,
        BlockKind::Merge,
        BlockKind::Intersection,
        BlockKind::TIntersection,
        BlockKind::Circular,
        BlockKind::Roundabout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Straight => "straight",
            BlockKind::Merge => "merge",
            BlockKind::Intersection => "intersection",
            BlockKind::TIntersection => "t_intersection",
            BlockKind::Circular => "circular",
            BlockKind::Roundabout => "roundabout",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        match norm.as_str() {
            "straight" => Ok(BlockKind::Straight),
            "merge" => Ok(BlockKind::Merge),
            "intersection" => Ok(BlockKind::Intersection),
            "tintersection" => Ok(BlockKind::TIntersection),
            "circular" => Ok(BlockKind::Circular),
            "roundabout" => Ok(BlockKind::Roundabout),
            _ => Err(Error::UnknownBlockKind(s.to_string())),
        }
    }
}

/// One block of a scenario. `length` is the through-route arc length for
/// straight, merge, intersection and circular blocks; for T-intersections and
/// roundabouts it is the combined length of the straight approach and exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub lane_count: usize,
    pub length: f64,
    pub radius: f64,
}

impl BlockSpec {
    pub fn new(kind: BlockKind, lane_count: usize) -> Self {
        let (length, radius) = match kind {
            BlockKind::Straight => (200.0, 0.0),
            BlockKind::Merge => (200.0, 0.0),
            BlockKind::Intersection => (160.0, 0.0),
            BlockKind::TIntersection => (140.0, 25.0),
            BlockKind::Circular => (160.0, 60.0),
            BlockKind::Roundabout => (100.0, 30.0),
        };
        Self {
            kind,
            lane_count,
            length,
            radius,
        }
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frenet {
    pub s: f64,
    pub d: f64,
}

impl Frenet {
    pub fn new(s: f64, d: f64) -> Self {
        Self { s, d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPose {
    pub position: Vec2,
    pub heading: f64,
}

/// Result of projecting a world point onto the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    OnNetwork(Frenet),
    OffRoad,
}

impl Projection {
    pub fn frenet(self) -> Option<Frenet> {
        match self {
            Projection::OnNetwork(f) => Some(f),
            Projection::OffRoad => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Primitive {
    Line {
        start: Vec2,
        heading: f64,
        length: f64,
    },
    /// `turn` is +1 for a left (counter-clockwise) turn, -1 for a right turn.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        turn: f64,
        length: f64,
    },
}

impl Primitive {
    fn length(&self) -> f64 {
        match *self {
            Primitive::Line { length, .. } | Primitive::Arc { length, .. } => length,
        }
    }

    fn curvature(&self) -> f64 {
        match *self {
            Primitive::Line { .. } => 0.0,
            Primitive::Arc { radius, turn, .. } => turn / radius,
        }
    }

    fn pose(&self, u: f64) -> WorldPose {
        match *self {
            Primitive::Line { start, heading, .. } => WorldPose {
                position: start + Vec2::from_angle(heading) * u,
                heading,
            },
            Primitive::Arc {
                center,
                radius,
                start_angle,
                turn,
                ..
            } => {
                let phi = start_angle + turn * u / radius;
                WorldPose {
                    position: center + Vec2::from_angle(phi) * radius,
                    heading: wrap_angle(phi + turn * FRAC_PI_2),
                }
            }
        }
    }

    /// Local `(u, d)` of the closest point, unclamped in `u`.
    fn project(&self, p: Vec2) -> (f64, f64) {
        match *self {
            Primitive::Line { start, heading, .. } => {
                let t = Vec2::from_angle(heading);
                let rel = p - start;
                (rel.dot(t), rel.dot(t.perp()))
            }
            Primitive::Arc {
                center,
                radius,
                start_angle,
                turn,
                length,
            } => {
                let rel = p - center;
                let phi = rel.y.atan2(rel.x);
                let mid = 0.5 * length;
                let phi_mid = start_angle + turn * mid / radius;
                let u = mid + turn * wrap_angle(phi - phi_mid) * radius;
                (u, turn * (radius - rel.norm()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Piece {
    s0: f64,
    prim: Primitive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    /// Parallel lane of the through route.
    Route,
    /// Acceleration lane of a merge block, right of the route.
    Ramp,
    /// Junction arm not on the through route.
    Branch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: usize,
    pub block: usize,
    pub kind: LaneKind,
    /// Lateral index counted from the left edge of the route (ramp = lane_count).
    pub index: usize,
    pub width: f64,
    pub centerline: Vec<Vec2>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub successors: Vec<usize>,
    /// Arc-length range on the route reference, for route and ramp lanes.
    pub s_range: Option<(f64, f64)>,
}

impl Lane {
    pub fn centerline_length(&self) -> f64 {
        self.centerline.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BranchCorridor {
    start: Vec2,
    heading: f64,
    length: f64,
    half_width: f64,
}

impl BranchCorridor {
    fn contains(&self, p: Vec2) -> bool {
        let t = Vec2::from_angle(self.heading);
        let rel = p - self.start;
        let u = rel.dot(t);
        let v = rel.dot(t.perp());
        (0.0..=self.length).contains(&u) && v.abs() <= self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub blocks: Vec<BlockSpec>,
    pub lane_count: usize,
    pub lane_width: f64,
    pub lanes: Vec<Lane>,
    /// Route arc-length interval of each block.
    pub block_ranges: Vec<(f64, f64)>,
    /// Vehicles whose `s` exceeds this have reached the destination.
    pub destination_s: f64,
    pub spawn_range: (f64, f64),
    pieces: Vec<Piece>,
    ramps: Vec<(f64, f64)>,
    corridors: Vec<BranchCorridor>,
}

struct RouteBuilder {
    pos: Vec2,
    heading: f64,
    s: f64,
    pieces: Vec<Piece>,
}

impl RouteBuilder {
    fn line(&mut self, length: f64) {
        let prim = Primitive::Line {
            start: self.pos,
            heading: self.heading,
            length,
        };
        self.push(prim);
    }

    fn arc(&mut self, radius: f64, sweep: f64) {
        let turn = sweep.signum();
        let center = self.pos + Vec2::from_angle(self.heading).perp() * (radius * turn);
        let rel = self.pos - center;
        let prim = Primitive::Arc {
            center,
            radius,
            start_angle: rel.y.atan2(rel.x),
            turn,
            length: radius * sweep.abs(),
        };
        self.push(prim);
    }

    fn push(&mut self, prim: Primitive) {
        let len = prim.length();
        self.pieces.push(Piece { s0: self.s, prim });
        let end = prim.pose(len);
        self.pos = end.position;
        self.heading = end.heading;
        self.s += len;
    }

    fn pose(&self) -> WorldPose {
        WorldPose {
            position: self.pos,
            heading: self.heading,
        }
    }
}

/// Builds a network from 1 to 3 blocks sharing `lane_count` lanes.
///
/// The seed only chooses turn directions of curved blocks, so identical inputs
/// always give identical networks.
pub fn build_road(spec: &[BlockSpec], lane_count: usize, seed: u64) -> Result<RoadNetwork> {
    build_road_with_width(spec, lane_count, DEFAULT_LANE_WIDTH, seed)
}

pub fn build_road_with_width(
    spec: &[BlockSpec],
    lane_count: usize,
    lane_width: f64,
    seed: u64,
) -> Result<RoadNetwork> {
    if spec.is_empty() || spec.len() > 3 {
        return Err(Error::InvalidRoad(format!(
            "expected 1 to 3 blocks, got {}",
            spec.len()
        )));
    }
    if !(2..=4).contains(&lane_count) {
        return Err(Error::InvalidRoad(format!(
            "lane count must be in 2..=4, got {lane_count}"
        )));
    }
    if lane_width <= 0.0 {
        return Err(Error::InvalidRoad("lane width must be positive".into()));
    }
    let half_road = 0.5 * lane_count as f64 * lane_width;
    for (i, block) in spec.iter().enumerate() {
        if block.lane_count != lane_count {
            if block.kind == BlockKind::Merge && block.lane_count < 2 {
                return Err(Error::InvalidRoad(format!(
                    "block {i}: merge needs at least 2 lanes, got {}",
                    block.lane_count
                )));
            }
            return Err(Error::InvalidRoad(format!(
                "block {i}: lane count {} differs from network lane count {lane_count}",
                block.lane_count
            )));
        }
        if !(block.length.is_finite() && block.length > 0.0) {
            return Err(Error::InvalidRoad(format!("block {i}: non-positive length")));
        }
        let curved = matches!(
            block.kind,
            BlockKind::Circular | BlockKind::TIntersection | BlockKind::Roundabout
        );
        if curved && block.radius <= half_road + 2.0 * lane_width {
            return Err(Error::InvalidRoad(format!(
                "block {i}: radius {} too tight for a {lane_count}-lane road",
                block.radius
            )));
        }
        if block.kind == BlockKind::Circular && block.length / block.radius >= 1.5 * PI {
            return Err(Error::InvalidRoad(format!(
                "block {i}: circular sweep must stay below 270 degrees"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut route = RouteBuilder {
        pos: Vec2::ZERO,
        heading: 0.0,
        s: 0.0,
        pieces: Vec::new(),
    };
    let mut block_ranges = Vec::with_capacity(spec.len());
    let mut ramps = Vec::new();
    let mut corridors = Vec::new();
    // (block, start, heading) of each junction arm
    let mut arms: Vec<(usize, Vec2, f64)> = Vec::new();

    for (b, block) in spec.iter().enumerate() {
        let s_start = route.s;
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        match block.kind {
            BlockKind::Straight => route.line(block.length),
            BlockKind::Merge => {
                route.line(block.length);
                ramps.push((s_start, s_start + RAMP_FRACTION * block.length));
            }
            BlockKind::Intersection => {
                route.line(0.5 * block.length);
                let mid = route.pose();
                let left = Vec2::from_angle(mid.heading).perp();
                arms.push((b, mid.position + left * half_road, mid.heading + FRAC_PI_2));
                arms.push((b, mid.position - left * half_road, mid.heading - FRAC_PI_2));
                route.line(0.5 * block.length);
            }
            BlockKind::TIntersection => {
                route.line(0.5 * block.length);
                let junction = route.pose();
                route.arc(block.radius, side * FRAC_PI_2);
                // the cross-street arm opposite the turn
                let out = Vec2::from_angle(junction.heading);
                let lateral = out.perp() * (-side);
                arms.push((
                    b,
                    junction.position + out * block.radius + lateral * half_road,
                    junction.heading - side * FRAC_PI_2,
                ));
                route.line(0.5 * block.length);
            }
            BlockKind::Circular => route.arc(block.radius, side * block.length / block.radius),
            BlockKind::Roundabout => {
                let entry_radius = block.radius * 0.8;
                route.line(0.5 * block.length);
                route.arc(entry_radius, -side * FRAC_PI_4);
                let ring_start = route.pose();
                route.arc(block.radius, side * PI);
                let ring_end = route.pose();
                route.arc(entry_radius, -side * FRAC_PI_4);
                route.line(0.5 * block.length);
                for pose in [ring_start, ring_end] {
                    let outward = Vec2::from_angle(pose.heading).perp() * (-side);
                    let heading = outward.y.atan2(outward.x);
                    arms.push((b, pose.position + outward * half_road, heading));
                }
            }
        }
        block_ranges.push((s_start, route.s));
    }

    let total = route.s;
    let mut net = RoadNetwork {
        blocks: spec.to_vec(),
        lane_count,
        lane_width,
        lanes: Vec::new(),
        block_ranges,
        destination_s: (total - DESTINATION_MARGIN).max(0.5 * total),
        spawn_range: (10.0, (60.0f64).min(0.3 * total)),
        pieces: route.pieces,
        ramps,
        corridors: Vec::new(),
    };

    // Route lanes, block by block.
    let mut route_ids: Vec<Vec<usize>> = Vec::with_capacity(spec.len());
    for (b, &(s0, s1)) in net.block_ranges.clone().iter().enumerate() {
        let mut ids = Vec::with_capacity(lane_count);
        for k in 0..lane_count {
            let id = net.lanes.len();
            let centerline = net.sample_offset(s0, s1, net.lane_center_offset(k));
            net.lanes.push(Lane {
                id,
                block: b,
                kind: LaneKind::Route,
                index: k,
                width: lane_width,
                centerline,
                left: None,
                right: None,
                successors: Vec::new(),
                s_range: Some((s0, s1)),
            });
            ids.push(id);
        }
        for k in 0..lane_count {
            if k > 0 {
                net.lanes[ids[k]].left = Some(ids[k - 1]);
            }
            if k + 1 < lane_count {
                net.lanes[ids[k]].right = Some(ids[k + 1]);
            }
        }
        route_ids.push(ids);
    }
    for b in 0..spec.len().saturating_sub(1) {
        for k in 0..lane_count {
            let next = route_ids[b + 1][k];
            net.lanes[route_ids[b][k]].successors.push(next);
        }
    }

    for &(r0, r1) in &net.ramps.clone() {
        let b = net.block_at(r0);
        let id = net.lanes.len();
        let rightmost = route_ids[b][lane_count - 1];
        let centerline = net.sample_offset(r0, r1, net.lane_center_offset(lane_count));
        net.lanes.push(Lane {
            id,
            block: b,
            kind: LaneKind::Ramp,
            index: lane_count,
            width: lane_width,
            centerline,
            left: Some(rightmost),
            right: None,
            successors: vec![rightmost],
            s_range: Some((r0, r1)),
        });
        net.lanes[rightmost].right = Some(id);
    }

    for (b, start, heading) in arms {
        corridors.push(BranchCorridor {
            start,
            heading,
            length: BRANCH_LENGTH,
            half_width: half_road,
        });
        let dir = Vec2::from_angle(heading);
        let mut ids = Vec::with_capacity(lane_count);
        for k in 0..lane_count {
            let id = net.lanes.len();
            let offset = dir.perp() * net.lane_center_offset(k);
            let n = (BRANCH_LENGTH / SAMPLE_SPACING).ceil() as usize;
            let centerline = (0..=n)
                .map(|i| start + offset + dir * (BRANCH_LENGTH * i as f64 / n as f64))
                .collect();
            net.lanes.push(Lane {
                id,
                block: b,
                kind: LaneKind::Branch,
                index: k,
                width: lane_width,
                centerline,
                left: None,
                right: None,
                successors: Vec::new(),
                s_range: None,
            });
            ids.push(id);
        }
        for k in 0..lane_count {
            if k > 0 {
                net.lanes[ids[k]].left = Some(ids[k - 1]);
            }
            if k + 1 < lane_count {
                net.lanes[ids[k]].right = Some(ids[k + 1]);
            }
            // junction arms are reachable from the route lanes of their block
            let from = route_ids[b][k];
            net.lanes[from].successors.push(ids[k]);
        }
    }
    net.corridors = corridors;
    Ok(net)
}

impl RoadNetwork {
    /// Total arc length of the through-route reference line.
    pub fn route_length(&self) -> f64 {
        self.pieces
            .last()
            .map(|p| p.s0 + p.prim.length())
            .unwrap_or(0.0)
    }

    /// Lateral offset of route lane `index` (0 = leftmost). `lane_count` is the ramp.
    pub fn lane_center_offset(&self, index: usize) -> f64 {
        (0.5 * self.lane_count as f64 - index as f64 - 0.5) * self.lane_width
    }

    /// Route lane index whose corridor contains offset `d`, ignoring ramps.
    pub fn lane_index_at(&self, d: f64) -> usize {
        let from_left = 0.5 * self.lane_count as f64 - d / self.lane_width;
        (from_left.floor().max(0.0) as usize).min(self.lane_count - 1)
    }

    pub fn block_at(&self, s: f64) -> usize {
        self.block_ranges
            .iter()
            .position(|&(_, s1)| s < s1)
            .unwrap_or(self.block_ranges.len() - 1)
    }

    pub fn block_kind_at(&self, s: f64) -> BlockKind {
        self.blocks[self.block_at(s)].kind
    }

    /// Whether a merge ramp lane exists at arc length `s`.
    pub fn ramp_at(&self, s: f64) -> bool {
        self.ramps.iter().any(|&(r0, r1)| (r0..=r1).contains(&s))
    }

    /// Number of lateral lane slots usable at `s` (route lanes plus a ramp).
    pub fn lanes_at(&self, s: f64) -> usize {
        self.lane_count + usize::from(self.ramp_at(s))
    }

    /// Rightward lateral extent of the paved surface at `s`.
    fn right_edge(&self, s: f64) -> f64 {
        let slots = self.lanes_at(s) as f64;
        0.5 * self.lane_count as f64 * self.lane_width - slots * self.lane_width
    }

    fn left_edge(&self) -> f64 {
        0.5 * self.lane_count as f64 * self.lane_width
    }

    fn piece_at(&self, s: f64) -> &Piece {
        let idx = self.pieces.partition_point(|p| p.s0 <= s);
        &self.pieces[idx.saturating_sub(1)]
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        self.piece_at(s).prim.curvature()
    }

    pub fn reference_pose(&self, s: f64) -> WorldPose {
        let piece = self.piece_at(s);
        piece.prim.pose(s - piece.s0)
    }

    pub fn to_world(&self, f: Frenet) -> WorldPose {
        let base = self.reference_pose(f.s);
        WorldPose {
            position: base.position + Vec2::from_angle(base.heading).perp() * f.d,
            heading: base.heading,
        }
    }

    /// Projects a world point onto the route. Points farther than two lane
    /// widths from every lane centerline are reported as off-road.
    pub fn to_frenet(&self, p: Vec2) -> Projection {
        const EPS: f64 = 1e-9;
        let last = self.pieces.len() - 1;
        let mut best: Option<Frenet> = None;
        for (i, piece) in self.pieces.iter().enumerate() {
            let (u, d) = piece.prim.project(p);
            let len = piece.prim.length();
            let lo_ok = u >= -EPS || i == 0;
            let hi_ok = u <= len + EPS || i == last;
            if !(lo_ok && hi_ok) {
                continue;
            }
            if let Primitive::Arc { radius, .. } = piece.prim {
                if d.abs() >= radius {
                    continue;
                }
            }
            if best.is_none_or(|b| d.abs() < b.d.abs()) {
                best = Some(Frenet::new(piece.s0 + u, d));
            }
        }
        match best {
            Some(f) if self.within_band(f) => Projection::OnNetwork(f),
            _ => Projection::OffRoad,
        }
    }

    fn within_band(&self, f: Frenet) -> bool {
        let top = self.lane_center_offset(0);
        let bottom = self.lane_center_offset(self.lanes_at(f.s) - 1);
        let band = 2.0 * self.lane_width;
        f.d <= top + band && f.d >= bottom - band
    }

    /// Whether a world point lies on the paved surface: inside the route
    /// lanes (plus ramp), or inside a junction arm.
    pub fn contains_point(&self, p: Vec2) -> bool {
        if let Projection::OnNetwork(f) = self.to_frenet(p) {
            let s_ok = f.s >= 0.0 && f.s <= self.route_length();
            if s_ok && f.d <= self.left_edge() && f.d >= self.right_edge(f.s) {
                return true;
            }
        }
        self.corridors.iter().any(|c| c.contains(p))
    }

    fn sample_offset(&self, s0: f64, s1: f64, d: f64) -> Vec<Vec2> {
        let n = ((s1 - s0) / SAMPLE_SPACING).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let s = s0 + (s1 - s0) * i as f64 / n as f64;
                self.to_world(Frenet::new(s, d)).position
            })
            .collect()
    }

    pub fn lane(&self, id: usize) -> Option<&Lane> {
        self.lanes.get(id)
    }
}
