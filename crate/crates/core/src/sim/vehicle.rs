//! Vehicle state and per-step kinematics under discrete maneuvers.

use super::geometry::{Obb, Vec2};
use super::road::{Frenet, RoadNetwork};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Discrete driving behaviors available to surrounding vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    Accelerate,
    Decelerate,
    Brake,
    LeftLaneChange,
    RightLaneChange,
}

impl Maneuver {
    pub const ALL: [Maneuver; 5] = [
        Maneuver::Accelerate,
        Maneuver::Decelerate,
        Maneuver::Brake,
        Maneuver::LeftLaneChange,
        Maneuver::RightLaneChange,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Maneuver> {
        Self::ALL.get(i).copied()
    }

    pub fn lane_change(side: Side) -> Maneuver {
        match side {
            Side::Left => Maneuver::LeftLaneChange,
            Side::Right => Maneuver::RightLaneChange,
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            Maneuver::LeftLaneChange => Some(Side::Left),
            Maneuver::RightLaneChange => Some(Side::Right),
            _ => None,
        }
    }

    /// Single-letter code used in traces and pattern acceptors.
    pub fn code(self) -> char {
        match self {
            Maneuver::Accelerate => 'A',
            Maneuver::Decelerate => 'D',
            Maneuver::Brake => 'B',
            Maneuver::LeftLaneChange => 'L',
            Maneuver::RightLaneChange => 'R',
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Maneuver::Accelerate => "accelerate",
            Maneuver::Decelerate => "decelerate",
            Maneuver::Brake => "brake",
            Maneuver::LeftLaneChange => "left_lane_change",
            Maneuver::RightLaneChange => "right_lane_change",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Target lane index, if it exists at arc length `s`.
    pub fn target_lane(self, lane: usize, s: f64, network: &RoadNetwork) -> Option<usize> {
        match self {
            Side::Left => lane.checked_sub(1),
            Side::Right => (lane + 1 < network.lanes_at(s)).then_some(lane + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub length: f64,
    pub width: f64,
    pub v_max: f64,
    pub a_acc: f64,
    pub a_dec: f64,
    pub a_brk: f64,
    /// Decelerate never takes a vehicle below this speed.
    pub v_min: f64,
    pub lane_change_duration: f64,
    /// Largest reverse speed the ego may reach.
    pub v_reverse_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length: 4.8,
            width: 1.9,
            v_max: 22.0,
            a_acc: 2.5,
            a_dec: 2.0,
            a_brk: 6.0,
            v_min: 2.0,
            lane_change_duration: 1.5,
            v_reverse_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub from_d: f64,
    pub target_lane: usize,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: usize,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub lane: usize,
    pub frenet: Frenet,
    pub length: f64,
    pub width: f64,
    pub lane_change: Option<LaneChange>,
}

impl VehicleState {
    /// Places a vehicle on the centre of route lane `lane` at arc length `s`.
    pub fn on_lane(
        id: usize,
        network: &RoadNetwork,
        lane: usize,
        s: f64,
        speed: f64,
        params: &VehicleParams,
    ) -> Self {
        let frenet = Frenet::new(s, network.lane_center_offset(lane));
        let pose = network.to_world(frenet);
        Self {
            id,
            position: pose.position,
            heading: pose.heading,
            speed,
            lane,
            frenet,
            length: params.length,
            width: params.width,
            lane_change: None,
        }
    }

    pub fn footprint(&self) -> Obb {
        Obb::new(self.position, self.heading, self.length, self.width)
    }

    pub fn is_changing_lane(&self) -> bool {
        self.lane_change.is_some()
    }
}

/// Outcome of one kinematic step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// A lane change was requested toward a lane that does not exist; the
    /// vehicle decelerated instead.
    pub illegal_lane_change: bool,
}

/// Continuous command for the ego vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoCommand {
    pub accel: f64,
    pub lane_change: Option<Side>,
    pub allow_reverse: bool,
}

/// Advances a surrounding vehicle by one step under `maneuver`.
///
/// A lane change runs for `lane_change_duration` as a cubic lateral blend at
/// constant speed; repeated lane-change maneuvers continue the active change,
/// longitudinal maneuvers keep acting while it completes.
pub fn step_vehicle(
    state: &VehicleState,
    maneuver: Maneuver,
    dt: f64,
    network: &RoadNetwork,
    params: &VehicleParams,
) -> StepOutcome {
    let v = state.speed;
    let mut illegal = false;
    let mut new_change = None;
    let speed = match maneuver {
        Maneuver::Accelerate => (v + params.a_acc * dt).min(params.v_max),
        Maneuver::Decelerate => decelerate(v, dt, params),
        Maneuver::Brake => (v - params.a_brk * dt).max(0.0),
        Maneuver::LeftLaneChange | Maneuver::RightLaneChange => {
            if state.lane_change.is_none() {
                let side = maneuver.side().expect("lane change maneuver");
                match side.target_lane(state.lane, state.frenet.s, network) {
                    Some(target) => {
                        new_change = Some(LaneChange {
                            from_d: state.frenet.d,
                            target_lane: target,
                            elapsed: 0.0,
                        })
                    }
                    None => illegal = true,
                }
            }
            if illegal {
                decelerate(v, dt, params)
            } else {
                v
            }
        }
    };
    let mut next = state.clone();
    if new_change.is_some() {
        next.lane_change = new_change;
    }
    integrate(&mut next, v, speed, dt, network, params);
    StepOutcome {
        state: next,
        illegal_lane_change: illegal,
    }
}

fn decelerate(v: f64, dt: f64, params: &VehicleParams) -> f64 {
    if v > params.v_min {
        (v - params.a_dec * dt).max(params.v_min)
    } else {
        v
    }
}

/// Advances the ego under a continuous acceleration command.
pub fn step_ego(
    state: &VehicleState,
    cmd: EgoCommand,
    dt: f64,
    network: &RoadNetwork,
    params: &VehicleParams,
) -> StepOutcome {
    let v = state.speed;
    let speed = if cmd.allow_reverse {
        (v + cmd.accel * dt).clamp(-params.v_reverse_max, params.v_max)
    } else if v >= 0.0 {
        (v + cmd.accel * dt).clamp(0.0, params.v_max)
    } else {
        // stop reversing before anything else
        (v + params.a_brk * dt).min(0.0)
    };
    let mut next = state.clone();
    let mut illegal = false;
    if let (Some(side), None) = (cmd.lane_change, &state.lane_change) {
        match side.target_lane(state.lane, state.frenet.s, network) {
            Some(target) => {
                next.lane_change = Some(LaneChange {
                    from_d: state.frenet.d,
                    target_lane: target,
                    elapsed: 0.0,
                })
            }
            None => illegal = true,
        }
    }
    integrate(&mut next, v, speed, dt, network, params);
    StepOutcome {
        state: next,
        illegal_lane_change: illegal,
    }
}

fn integrate(
    next: &mut VehicleState,
    v0: f64,
    v1: f64,
    dt: f64,
    network: &RoadNetwork,
    params: &VehicleParams,
) {
    let s0 = next.frenet.s;
    let d0 = next.frenet.d;
    let mut d1 = d0;
    if let Some(mut change) = next.lane_change {
        change.elapsed += dt;
        let tau = (change.elapsed / params.lane_change_duration).min(1.0);
        let target_d = network.lane_center_offset(change.target_lane);
        d1 = change.from_d + (target_d - change.from_d) * tau * tau * (3.0 - 2.0 * tau);
        if tau >= 1.0 {
            next.lane = change.target_lane;
            next.lane_change = None;
            d1 = target_d;
        } else {
            next.lane_change = Some(change);
        }
    }
    let travel = 0.5 * (v0 + v1) * dt;
    let dd = d1 - d0;
    let along = (travel * travel - dd * dd).max(0.0).sqrt() * travel.signum();
    let kappa = network.curvature_at(s0);
    let stretch = (1.0 - kappa * 0.5 * (d0 + d1)).max(1e-3);
    let s1 = s0 + along / stretch;
    let pose = network.to_world(Frenet::new(s1, d1));
    let rel_heading = if along.abs() > 1e-9 {
        dd.atan2(along.abs())
    } else {
        0.0
    };
    next.speed = v1;
    next.frenet = Frenet::new(s1, d1);
    next.position = pose.position;
    next.heading = super::geometry::wrap_angle(pose.heading + rel_heading);
}
