//! Ego policies under test.
//!
//! Both policies are pure functions of `(world, network)`. The IDM policy
//! tracks leaders by lateral footprint overlap and keeps the standard IDM
//! margins; the heuristic policy only sees snapped lane ids and reacts with
//! thinner margins.

mod heuristic;
mod idm;

pub use heuristic::{heuristic_policy_step, HeuristicParams};
pub use idm::{idm_acceleration, idm_policy_step, AlreadyOverlapping, IdmParams};

use crate::sim::{EgoCommand, RoadNetwork, Side, VehicleParams, VehicleState, WorldState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneIntent {
    Keep,
    Left,
    Right,
    Reverse,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SutDecision {
    pub accel: f64,
    pub intent: LaneIntent,
}

impl SutDecision {
    pub fn to_command(self, vehicle: &VehicleParams) -> EgoCommand {
        match self.intent {
            LaneIntent::Keep => EgoCommand {
                accel: self.accel,
                lane_change: None,
                allow_reverse: false,
            },
            LaneIntent::Left | LaneIntent::Right => EgoCommand {
                accel: self.accel,
                lane_change: Some(if self.intent == LaneIntent::Left {
                    Side::Left
                } else {
                    Side::Right
                }),
                allow_reverse: false,
            },
            LaneIntent::Stop => EgoCommand {
                accel: -vehicle.a_brk,
                lane_change: None,
                allow_reverse: false,
            },
            LaneIntent::Reverse => EgoCommand {
                accel: self.accel.min(0.0),
                lane_change: None,
                allow_reverse: true,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SutKind {
    Idm,
    Heuristic,
}

impl std::str::FromStr for SutKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "idm" => Ok(SutKind::Idm),
            "heuristic" => Ok(SutKind::Heuristic),
            other => Err(crate::Error::InvalidConfig(format!("unknown sut `{other}`"))),
        }
    }
}

impl std::fmt::Display for SutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SutKind::Idm => "idm",
            SutKind::Heuristic => "heuristic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SutConfig {
    pub idm: IdmParams,
    pub heuristic: HeuristicParams,
    /// Trigger and sidestep clearance shared with the fuzzer.
    pub d_safe: f64,
    /// Stopped leaders closer than this prompt a sidestep or stop.
    pub obstacle_range: f64,
    /// Speed under which a leader counts as stopped.
    pub stopped_speed: f64,
    pub vehicle: VehicleParams,
}

impl Default for SutConfig {
    fn default() -> Self {
        Self {
            idm: IdmParams::default(),
            heuristic: HeuristicParams::default(),
            d_safe: 3.5,
            obstacle_range: 25.0,
            stopped_speed: 0.5,
            vehicle: VehicleParams::default(),
        }
    }
}

/// Runs the selected policy.
pub fn policy_step(kind: SutKind, world: &WorldState, network: &RoadNetwork, cfg: &SutConfig) -> SutDecision {
    match kind {
        SutKind::Idm => idm_policy_step(world, network, cfg),
        SutKind::Heuristic => heuristic_policy_step(world, network, cfg),
    }
}

/// A vehicle relative to the ego along the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Neighbor {
    pub id: usize,
    /// Bumper-to-bumper longitudinal gap; negative when the vehicles overlap
    /// longitudinally.
    pub gap: f64,
    pub ahead: bool,
    pub speed: f64,
}

/// How a policy decides which lane a surrounding vehicle occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LaneSense {
    /// Any lateral footprint overlap with the lane corridor.
    Footprint,
    /// The vehicle's snapped lane id.
    LaneId,
}

pub(crate) fn occupies(v: &VehicleState, lane: usize, network: &RoadNetwork, sense: LaneSense) -> bool {
    match sense {
        LaneSense::LaneId => v.lane == lane,
        LaneSense::Footprint => {
            let center = network.lane_center_offset(lane);
            let half = 0.5 * network.lane_width + 0.5 * v.width - 0.2;
            (v.frenet.d - center).abs() < half
        }
    }
}

pub(crate) fn neighbor(ego: &VehicleState, other: &VehicleState) -> Neighbor {
    let ds = other.frenet.s - ego.frenet.s;
    Neighbor {
        id: other.id,
        gap: ds.abs() - 0.5 * (ego.length + other.length),
        ahead: ds > 0.0,
        speed: other.speed,
    }
}

/// Nearest vehicles ahead and behind the ego in `lane`.
pub(crate) fn lane_neighbors(
    world: &WorldState,
    lane: usize,
    network: &RoadNetwork,
    sense: LaneSense,
) -> (Option<Neighbor>, Option<Neighbor>) {
    let mut ahead: Option<Neighbor> = None;
    let mut behind: Option<Neighbor> = None;
    for sv in &world.surrounding {
        if !occupies(sv, lane, network, sense) {
            continue;
        }
        let n = neighbor(&world.ego, sv);
        let slot = if n.ahead { &mut ahead } else { &mut behind };
        if slot.is_none_or(|cur| n.gap < cur.gap) {
            *slot = Some(n);
        }
    }
    (ahead, behind)
}

/// Lanes the ego currently occupies: its own and any lane-change target.
pub(crate) fn ego_lanes(ego: &VehicleState) -> Vec<usize> {
    let mut lanes = vec![ego.lane];
    if let Some(change) = ego.lane_change {
        lanes.push(change.target_lane);
    }
    lanes
}

/// Nearest leader over all lanes the ego occupies.
pub(crate) fn leader(world: &WorldState, network: &RoadNetwork, sense: LaneSense) -> Option<Neighbor> {
    ego_lanes(&world.ego)
        .into_iter()
        .filter_map(|lane| lane_neighbors(world, lane, network, sense).0)
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
}

/// Whether the adjacent lane on `side` exists and leaves at least `clearance`
/// metres ahead and behind the ego.
pub(crate) fn side_clear(
    world: &WorldState,
    network: &RoadNetwork,
    side: Side,
    clearance: f64,
    sense: LaneSense,
) -> bool {
    let ego = &world.ego;
    let Some(target) = side.target_lane(ego.lane, ego.frenet.s, network) else {
        return false;
    };
    let (ahead, behind) = lane_neighbors(world, target, network, sense);
    ahead.is_none_or(|n| n.gap > clearance) && behind.is_none_or(|n| n.gap > clearance)
}
