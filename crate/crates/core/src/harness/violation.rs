use crate::sim::{detect_collisions, is_within_boundary, RoadNetwork, WorldState, EGO_ID};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbnormalKind {
    Reverse,
    OffRoad,
    Stall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "subkind")]
pub enum ViolationKind {
    MultiVehicleCrash,
    AbnormalTrajectory(AbnormalKind),
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::MultiVehicleCrash => f.write_str("multi_vehicle_crash"),
            ViolationKind::AbnormalTrajectory(AbnormalKind::Reverse) => f.write_str("reverse"),
            ViolationKind::AbnormalTrajectory(AbnormalKind::OffRoad) => f.write_str("off_road"),
            ViolationKind::AbnormalTrajectory(AbnormalKind::Stall) => f.write_str("stall"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub kind: ViolationKind,
    pub time: f64,
    pub step: u64,
    /// Vehicles involved: the ego plus colliding vehicles or nearby SVs.
    pub vehicles: Vec<usize>,
    /// Surrounding vehicles within the attribution distance at detection.
    pub nearby_svs: usize,
    pub trace: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViolationConfig {
    /// Footprint gap within which a surrounding vehicle counts as involved, m.
    pub d_constraint: f64,
    pub min_nearby_svs: usize,
    pub reverse_speed: f64,
    pub reverse_steps: usize,
    pub stall_speed: f64,
    pub stall_steps: usize,
}

impl Default for ViolationConfig {
    fn default() -> Self {
        Self {
            d_constraint: 2.0,
            min_nearby_svs: 2,
            reverse_speed: -0.1,
            reverse_steps: 5,
            stall_speed: 0.1,
            stall_steps: 100,
        }
    }
}

/// Running counters the oracle needs across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OracleHistory {
    pub reverse_run: usize,
    pub stall_run: usize,
}

/// What the oracle saw this step, before the proximity condition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observation {
    pub ego_collisions: Vec<usize>,
    pub candidate: Option<ViolationKind>,
    pub nearby_svs: usize,
    pub nearby_ids: Vec<usize>,
}

impl Observation {
    pub fn ego_crashed(&self) -> bool {
        !self.ego_collisions.is_empty()
    }
}

/// Updates `history` with the post-step `world` and classifies the step.
pub fn observe(world: &WorldState, network: &RoadNetwork, history: &mut OracleHistory, cfg: &ViolationConfig) -> Observation {
    let v = world.ego.speed;
    history.reverse_run = if v < cfg.reverse_speed { history.reverse_run + 1 } else { 0 };
    history.stall_run = if v.abs() < cfg.stall_speed { history.stall_run + 1 } else { 0 };

    let ego_collisions: Vec<usize> = detect_collisions(world)
        .into_iter()
        .filter(|&(a, _)| a == EGO_ID)
        .map(|(_, b)| b)
        .collect();
    let ego_box = world.ego.footprint();
    let nearby_ids: Vec<usize> = world
        .surrounding
        .iter()
        .filter(|sv| ego_box.gap(&sv.footprint()) < cfg.d_constraint)
        .map(|sv| sv.id)
        .collect();
    let candidate = if !ego_collisions.is_empty() {
        Some(ViolationKind::MultiVehicleCrash)
    } else if history.reverse_run >= cfg.reverse_steps {
        Some(ViolationKind::AbnormalTrajectory(AbnormalKind::Reverse))
    } else if !is_within_boundary(&world.ego, network) {
        Some(ViolationKind::AbnormalTrajectory(AbnormalKind::OffRoad))
    } else if history.stall_run >= cfg.stall_steps {
        Some(ViolationKind::AbnormalTrajectory(AbnormalKind::Stall))
    } else {
        None
    };
    Observation {
        ego_collisions,
        candidate,
        nearby_svs: nearby_ids.len(),
        nearby_ids,
    }
}

/// Violation oracle: a candidate counts only with enough surrounding
/// vehicles close to the ego. `require_proximity = false` drops that
/// condition.
pub fn detect_violation(
    world: &WorldState,
    network: &RoadNetwork,
    history: &mut OracleHistory,
    cfg: &ViolationConfig,
    require_proximity: bool,
) -> Option<ViolationRecord> {
    let obs = observe(world, network, history, cfg);
    to_record(world, &obs, cfg, require_proximity)
}

pub fn to_record(world: &WorldState, obs: &Observation, cfg: &ViolationConfig, require_proximity: bool) -> Option<ViolationRecord> {
    let kind = obs.candidate?;
    if require_proximity && obs.nearby_svs < cfg.min_nearby_svs {
        return None;
    }
    let mut vehicles = vec![EGO_ID];
    vehicles.extend(&obs.ego_collisions);
    vehicles.extend(obs.nearby_ids.iter().filter(|id| !obs.ego_collisions.contains(id)));
    Some(ViolationRecord {
        kind,
        time: world.time(),
        step: world.step,
        vehicles,
        nearby_svs: obs.nearby_svs,
        trace: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_road, BlockKind, BlockSpec, VehicleParams, VehicleState};

    fn world(svs: &[(usize, f64)]) -> (WorldState, RoadNetwork) {
        let net = build_road(&[BlockSpec::new(BlockKind::Straight, 3)], 3, 0).unwrap();
        let p = VehicleParams::default();
        let ego = VehicleState::on_lane(0, &net, 1, 80.0, 5.0, &p);
        let surrounding = svs
            .iter()
            .enumerate()
            .map(|(i, &(lane, s))| VehicleState::on_lane(i + 1, &net, lane, s, 5.0, &p))
            .collect();
        (
            WorldState {
                ego,
                surrounding,
                step: 10,
                dt: 0.1,
            },
            net,
        )
    }

    #[test]
    fn crash_needs_two_nearby() {
        let cfg = ViolationConfig::default();
        let (w, net) = world(&[(1, 84.0), (0, 79.0)]);
        let v = detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).unwrap();
        assert_eq!(v.kind, ViolationKind::MultiVehicleCrash);
        assert_eq!(v.nearby_svs, 2);
        assert_eq!(v.vehicles, vec![0, 1, 2]);

        let (w, net) = world(&[(1, 84.0), (0, 120.0)]);
        assert!(detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).is_none());
        assert!(detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, false).is_some());
    }

    #[test]
    fn stall_after_run() {
        let cfg = ViolationConfig::default();
        let (mut w, net) = world(&[(0, 80.0), (2, 80.0)]);
        w.ego.speed = 0.0;
        let mut h = OracleHistory::default();
        for _ in 0..99 {
            assert!(detect_violation(&w, &net, &mut h, &cfg, true).is_none());
        }
        let v = detect_violation(&w, &net, &mut h, &cfg, true).unwrap();
        assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::Stall));
    }

    #[test]
    fn reverse_after_five_steps() {
        let cfg = ViolationConfig::default();
        let (mut w, net) = world(&[(0, 80.0), (2, 80.0)]);
        w.ego.speed = -0.5;
        let mut h = OracleHistory::default();
        for _ in 0..4 {
            assert!(detect_violation(&w, &net, &mut h, &cfg, true).is_none());
        }
        let v = detect_violation(&w, &net, &mut h, &cfg, true).unwrap();
        assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::Reverse));
    }

    #[test]
    fn off_road_with_company() {
        let cfg = ViolationConfig::default();
        let (mut w, net) = world(&[(2, 80.0), (2, 85.0)]);
        w.ego.frenet.d = -7.0;
        w.ego.position = net.to_world(w.ego.frenet).position;
        let v = detect_violation(&w, &net, &mut OracleHistory::default(), &cfg, true).unwrap();
        assert_eq!(v.kind, ViolationKind::AbnormalTrajectory(AbnormalKind::OffRoad));
    }
}
