use super::road::RoadNetwork;
use super::vehicle::VehicleState;
use serde::{Deserialize, Serialize};

/// Id of the ego vehicle; surrounding vehicles are numbered from 1.
pub const EGO_ID: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub ego: VehicleState,
    pub surrounding: Vec<VehicleState>,
    pub step: u64,
    pub dt: f64,
}

impl WorldState {
    pub fn vehicles(&self) -> impl Iterator<Item = &VehicleState> {
        std::iter::once(&self.ego).chain(self.surrounding.iter())
    }

    pub fn vehicle(&self, id: usize) -> Option<&VehicleState> {
        self.vehicles().find(|v| v.id == id)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Number of surrounding vehicles whose footprint lies within `range`
    /// metres of the ego footprint.
    pub fn surrounding_within(&self, range: f64) -> usize {
        let ego = self.ego.footprint();
        self.surrounding
            .iter()
            .filter(|sv| ego.gap(&sv.footprint()) < range)
            .count()
    }
}

/// All unordered pairs `(a, b)`, `a < b`, whose footprints overlap.
pub fn detect_collisions(world: &WorldState) -> Vec<(usize, usize)> {
    let boxes: Vec<_> = world.vehicles().map(|v| (v.id, v.footprint())).collect();
    let mut pairs = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].1.overlaps(&boxes[j].1) {
                let (a, b) = (boxes[i].0, boxes[j].0);
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs
}

/// Smallest centre-to-centre distance from vehicle `id` to any other vehicle.
/// `None` when the id is unknown or the vehicle has no neighbours.
pub fn min_neighbor_distance(world: &WorldState, id: usize) -> Option<f64> {
    let me = world.vehicle(id)?;
    world
        .vehicles()
        .filter(|v| v.id != id)
        .map(|v| v.position.distance(me.position))
        .min_by(f64::total_cmp)
}

/// True iff the vehicle footprint lies on the paved surface.
pub fn is_within_boundary(state: &VehicleState, network: &RoadNetwork) -> bool {
    let c = state.footprint().corners();
    let probes = [
        c[0],
        c[1],
        c[2],
        c[3],
        (c[0] + c[1]) * 0.5,
        (c[1] + c[2]) * 0.5,
        (c[2] + c[3]) * 0.5,
        (c[3] + c[0]) * 0.5,
    ];
    probes.iter().all(|&p| network.contains_point(p))
}
