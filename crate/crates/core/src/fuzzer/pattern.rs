//! Finite-state action patterns compiled into segment programs.

use super::trigger::{PatternKind, Relation};
use super::FuzzerConfig;
use crate::sim::{Maneuver, RoadNetwork, Side, VehicleState};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Condition ending an open-ended segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Bumper gap to the ego below the safety distance.
    WithinSafeDistance,
    /// In an adjacent lane and fully ahead of the ego.
    SideFront,
}

impl Predicate {
    pub fn holds(self, sv: &VehicleState, ego: &VehicleState, cfg: &FuzzerConfig) -> bool {
        let r = Relation::of(sv, ego);
        match self {
            Predicate::WithinSafeDistance => r.gap < cfg.d_safe,
            Predicate::SideFront => r.side_front(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Fixed(Maneuver, usize),
    /// Repeat the maneuver until the predicate holds.
    Until(Maneuver, Predicate),
}

/// Which random branch a pattern took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Decelerate,
    Brake,
    LaneChange,
    /// Patterns without a random branch.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternState {
    pub kind: PatternKind,
    pub branch: Branch,
    pub segments: Vec<Segment>,
    segment: usize,
    done_in_segment: usize,
    /// Maneuvers emitted so far.
    pub emitted: Vec<Maneuver>,
    /// A requested lane change was infeasible and the other side was used.
    pub substituted: bool,
    /// The step horizon ended the pattern before its program completed.
    pub forced: bool,
}

fn lane_change_side<R: Rng + ?Sized>(
    preferred: Option<Side>,
    sv: &VehicleState,
    network: &RoadNetwork,
    rng: &mut R,
) -> (Option<Side>, bool) {
    let feasible: Vec<Side> = [Side::Left, Side::Right]
        .into_iter()
        .filter(|s| s.target_lane(sv.lane, sv.frenet.s, network).is_some())
        .collect();
    match preferred {
        Some(p) if feasible.contains(&p) => (Some(p), false),
        Some(_) => (feasible.first().copied(), true),
        None if feasible.is_empty() => (None, false),
        None => (Some(feasible[rng.random_range(0..feasible.len())]), false),
    }
}

fn side_toward(from: usize, to: usize) -> Option<Side> {
    match from.cmp(&to) {
        std::cmp::Ordering::Greater => Some(Side::Left),
        std::cmp::Ordering::Less => Some(Side::Right),
        std::cmp::Ordering::Equal => None,
    }
}

/// Compiles one path through the pattern automaton for the current world.
pub fn compile_pattern<R: Rng + ?Sized>(
    kind: PatternKind,
    sv: &VehicleState,
    ego: &VehicleState,
    network: &RoadNetwork,
    cfg: &FuzzerConfig,
    rng: &mut R,
) -> PatternState {
    let lc = cfg.lane_change_steps;
    let mut substituted = false;
    let mut segments = Vec::new();
    let change = |segments: &mut Vec<Segment>, side: Option<Side>| -> Option<Side> {
        if let Some(s) = side {
            segments.push(Segment::Fixed(Maneuver::lane_change(s), lc));
        }
        side
    };
    let three_way = |rng: &mut R| match rng.random_range(0..3) {
        0 => Branch::Decelerate,
        1 => Branch::Brake,
        _ => Branch::LaneChange,
    };
    let branch = match kind {
        PatternKind::Ahead => {
            let b = three_way(rng);
            match b {
                Branch::Decelerate => segments.push(Segment::Fixed(Maneuver::Decelerate, cfg.k_dec)),
                Branch::Brake => segments.push(Segment::Fixed(Maneuver::Brake, cfg.k_brk)),
                _ => {
                    let (side, _) = lane_change_side(None, sv, network, rng);
                    if let Some(s) = change(&mut segments, side) {
                        segments.push(Segment::Fixed(Maneuver::lane_change(s.opposite()), lc));
                    }
                }
            }
            b
        }
        PatternKind::SideFront => {
            let (side, sub) = lane_change_side(side_toward(sv.lane, ego.lane), sv, network, rng);
            substituted |= sub;
            change(&mut segments, side);
            let b = three_way(rng);
            match b {
                Branch::Decelerate => segments.push(Segment::Fixed(Maneuver::Decelerate, cfg.k_dec)),
                Branch::Brake => segments.push(Segment::Fixed(Maneuver::Brake, cfg.k_brk)),
                _ => {
                    // after the cut-in the vehicle sits in the ego's lane
                    let mut after = sv.clone();
                    after.lane = ego.lane;
                    let (side, _) = lane_change_side(None, &after, network, rng);
                    change(&mut segments, side);
                }
            }
            b
        }
        PatternKind::Behind => {
            if !Predicate::WithinSafeDistance.holds(sv, ego, cfg) {
                segments.push(Segment::Until(Maneuver::Accelerate, Predicate::WithinSafeDistance));
            }
            let (side, _) = lane_change_side(None, sv, network, rng);
            change(&mut segments, side);
            segments.push(Segment::Until(Maneuver::Accelerate, Predicate::SideFront));
            Branch::Single
        }
        PatternKind::SideBehind => {
            segments.push(Segment::Until(Maneuver::Accelerate, Predicate::SideFront));
            Branch::Single
        }
    };
    PatternState {
        kind,
        branch,
        segments,
        segment: 0,
        done_in_segment: 0,
        emitted: Vec::new(),
        substituted,
        forced: false,
    }
}

impl PatternState {
    pub fn is_active(&self) -> bool {
        self.segment < self.segments.len() && !self.forced
    }

    pub fn steps(&self) -> usize {
        self.emitted.len()
    }

    /// Emits the next maneuver, or `None` once the program has completed.
    /// Open-ended segments re-check their predicate before every emission.
    pub fn advance(&mut self, sv: &VehicleState, ego: &VehicleState, cfg: &FuzzerConfig) -> Option<Maneuver> {
        if self.forced {
            return None;
        }
        if self.emitted.len() >= cfg.pattern_horizon {
            self.forced = true;
            return None;
        }
        while let Some(seg) = self.segments.get(self.segment).copied() {
            let m = match seg {
                Segment::Fixed(m, count) => {
                    if self.done_in_segment >= count {
                        self.next_segment();
                        continue;
                    }
                    m
                }
                Segment::Until(m, pred) => {
                    if pred.holds(sv, ego, cfg) {
                        self.next_segment();
                        continue;
                    }
                    m
                }
            };
            self.done_in_segment += 1;
            if let Segment::Fixed(_, count) = seg {
                if self.done_in_segment >= count {
                    self.next_segment();
                }
            }
            self.emitted.push(m);
            return Some(m);
        }
        None
    }

    fn next_segment(&mut self) {
        self.segment += 1;
        self.done_in_segment = 0;
    }
}
