use super::{leader, side_clear, LaneIntent, LaneSense, SutConfig, SutDecision};
use crate::sim::{RoadNetwork, Side, WorldState};
use serde::{Deserialize, Serialize};

/// Intelligent Driver Model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfortable_decel: f64,
    pub exponent: f64,
    pub jam_distance: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 20.0,
            time_headway: 1.5,
            max_accel: 2.0,
            comfortable_decel: 2.0,
            exponent: 4.0,
            jam_distance: 2.0,
        }
    }
}

impl IdmParams {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            self.desired_speed,
            self.time_headway,
            self.max_accel,
            self.comfortable_decel,
            self.exponent,
            self.jam_distance,
        ]
        .iter()
        .all(|&x| x.is_finite() && x > 0.0);
        if !positive || self.exponent < 1.0 {
            return Err(crate::Error::InvalidConfig(
                "IDM parameters must be positive with exponent >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The gap to the leader is already non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlreadyOverlapping;

/// IDM acceleration for speed `v`, bumper gap `gap` (may be infinite) and
/// approach rate `v - v_leader`.
///
/// The desired dynamic gap is floored at zero so that a faster leader never
/// increases the braking term.
pub fn idm_acceleration(
    v: f64,
    gap: f64,
    approach_rate: f64,
    p: &IdmParams,
) -> Result<f64, AlreadyOverlapping> {
    if gap <= 0.0 {
        return Err(AlreadyOverlapping);
    }
    let free = 1.0 - (v / p.desired_speed).powf(p.exponent);
    if gap.is_infinite() {
        return Ok(p.max_accel * free);
    }
    let dynamic = v * p.time_headway
        + v * approach_rate / (2.0 * (p.max_accel * p.comfortable_decel).sqrt());
    let desired = (p.jam_distance + dynamic).max(0.0);
    Ok(p.max_accel * (free - (desired / gap).powi(2)))
}

pub fn idm_policy_step(world: &WorldState, network: &RoadNetwork, cfg: &SutConfig) -> SutDecision {
    let ego = &world.ego;
    let a_brk = cfg.vehicle.a_brk;
    let v = ego.speed.max(0.0);
    let lead = leader(world, network, LaneSense::Footprint);
    let raw = match lead {
        Some(n) => idm_acceleration(v, n.gap, v - n.speed, &cfg.idm).unwrap_or(-a_brk),
        None => idm_acceleration(v, f64::INFINITY, 0.0, &cfg.idm).unwrap_or(0.0),
    };
    let accel = raw.clamp(-a_brk, cfg.idm.max_accel);

    if let Some(n) = lead {
        let obstacle = n.speed < cfg.stopped_speed && n.gap < cfg.obstacle_range;
        if obstacle && ego.lane_change.is_none() {
            for side in [Side::Left, Side::Right] {
                if side_clear(world, network, side, cfg.d_safe, LaneSense::Footprint) {
                    let intent = match side {
                        Side::Left => LaneIntent::Left,
                        Side::Right => LaneIntent::Right,
                    };
                    return SutDecision { accel, intent };
                }
            }
            return SutDecision {
                accel: -a_brk,
                intent: LaneIntent::Stop,
            };
        }
    }
    SutDecision {
        accel,
        intent: LaneIntent::Keep,
    }
}
