use super::{leader, side_clear, LaneIntent, LaneSense, SutConfig, SutDecision};
use crate::sim::{RoadNetwork, Side, WorldState};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicParams {
    pub target_speed: f64,
    /// Proportional speed-tracking gain, 1/s.
    pub speed_gain: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    /// Hard braking below `brake_fraction * d_safe` of bumper gap.
    pub brake_fraction: f64,
    /// Time headway added to `d_safe` for the soft-braking band, s.
    pub headway: f64,
    /// Closing speed above which a hard-braking ego also swerves, m/s.
    pub swerve_closing_speed: f64,
    /// Back out when stopped and boxed in.
    pub reverse_when_boxed: bool,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self {
            target_speed: 20.0,
            speed_gain: 0.5,
            max_accel: 2.0,
            comfortable_decel: 2.0,
            brake_fraction: 0.5,
            headway: 0.5,
            swerve_closing_speed: 3.0,
            reverse_when_boxed: true,
        }
    }
}

pub fn heuristic_policy_step(world: &WorldState, network: &RoadNetwork, cfg: &SutConfig) -> SutDecision {
    let p = &cfg.heuristic;
    let ego = &world.ego;
    let a_brk = cfg.vehicle.a_brk;
    let v = ego.speed.max(0.0);
    let mut accel = (p.speed_gain * (p.target_speed - v)).clamp(-p.comfortable_decel, p.max_accel);
    let keep = |accel| SutDecision {
        accel,
        intent: LaneIntent::Keep,
    };

    let Some(lead) = leader(world, network, LaneSense::LaneId) else {
        return keep(accel);
    };
    let hard_gap = p.brake_fraction * cfg.d_safe;
    let boxed = |clearance: f64| {
        !side_clear(world, network, Side::Left, clearance, LaneSense::LaneId)
            && !side_clear(world, network, Side::Right, clearance, LaneSense::LaneId)
    };

    if lead.gap < hard_gap {
        if p.reverse_when_boxed && ego.speed < 0.1 && lead.speed < cfg.stopped_speed && boxed(hard_gap) {
            return SutDecision {
                accel: -a_brk,
                intent: LaneIntent::Reverse,
            };
        }
        if v - lead.speed > p.swerve_closing_speed && ego.lane_change.is_none() {
            for side in [Side::Left, Side::Right] {
                if side.target_lane(ego.lane, ego.frenet.s, network).is_some() {
                    let intent = match side {
                        Side::Left => LaneIntent::Left,
                        Side::Right => LaneIntent::Right,
                    };
                    return SutDecision { accel: -a_brk, intent };
                }
            }
        }
        return keep(-a_brk);
    }
    if lead.gap < cfg.d_safe + p.headway * v {
        accel = accel.min(-p.comfortable_decel);
    }
    let obstacle = lead.speed < cfg.stopped_speed && lead.gap < cfg.obstacle_range;
    if obstacle && ego.lane_change.is_none() {
        for side in [Side::Left, Side::Right] {
            if side_clear(world, network, side, hard_gap, LaneSense::LaneId) {
                let intent = match side {
                    Side::Left => LaneIntent::Left,
                    Side::Right => LaneIntent::Right,
                };
                return SutDecision { accel, intent };
            }
        }
    }
    keep(accel)
}
