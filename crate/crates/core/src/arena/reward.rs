use super::{enclosure_geometry, ArenaState, EnclosureGeometry};
use crate::sim::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardWeights {
    /// Proximity weight.
    pub mu1: f64,
    /// Weight of the staged encirclement terms.
    pub mu2: f64,
    /// Completion weight.
    pub mu3: f64,
    /// Completion indicator value.
    pub completion: f64,
    pub d_enclosure: f64,
    /// Guard added to the cosine denominator.
    pub cos_epsilon: f64,
    /// Use `P_s - P_e` as the alignment direction, which rewards moving away.
    pub reverse_proximity_sign: bool,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            mu1: 0.7,
            mu2: 0.01,
            mu3: 0.5,
            completion: 10.0,
            d_enclosure: 0.3,
            cos_epsilon: 0.001,
            reverse_proximity_sign: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentReward {
    pub near: f64,
    pub track: f64,
    pub encircle: f64,
    pub full: f64,
    pub finish: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRewards {
    pub agents: Vec<AgentReward>,
    /// Completion reached; the episode ends.
    pub done: bool,
    /// Geometry of the post-transition state.
    pub geometry: EnclosureGeometry,
}

/// Movement magnitude times the cosine between the movement and the
/// direction to the evader.
pub fn proximity_reward(position: Vec2, velocity: Vec2, evader: Vec2, w: &RewardWeights) -> f64 {
    let dir = if w.reverse_proximity_sign {
        position - evader
    } else {
        evader - position
    };
    let speed = velocity.norm();
    if speed == 0.0 {
        return 0.0;
    }
    let cos = velocity.dot(dir) / (speed * dir.norm() + w.cos_epsilon);
    speed * cos
}

/// Rewards for the transition `state -> next`.
///
/// Proximity pairs the movement chosen during the transition with the
/// direction to the evader before it. Stage conditions and completion are
/// evaluated on `next`; the full-enclosure term uses the distance decrease
/// across the transition.
pub fn agent_rewards(state: &ArenaState, next: &ArenaState, w: &RewardWeights) -> StepRewards {
    let n = next.n();
    let geometry = enclosure_geometry(&next.agent_positions(), next.evader.position);
    let nf = n as f64;
    let (mut track, mut encircle, mut full, mut finish) = (0.0, 0.0, 0.0, 0.0);
    let done;
    if n >= 3 {
        let enclosed = geometry.enclosed();
        if enclosed && geometry.max_distance <= w.d_enclosure {
            finish = w.completion;
        } else if enclosed {
            let before: f64 = state.distances().iter().sum();
            let after: f64 = geometry.distances.iter().sum();
            full = ((before - after) / nf).exp();
        } else if geometry.min_distance >= w.d_enclosure {
            let sum: f64 = geometry.distances.iter().sum();
            track = if geometry.max_distance > 0.0 {
                -sum / geometry.max_distance
            } else {
                0.0
            };
        } else {
            let excess = (geometry.area_sum - geometry.total_area).max(0.0);
            encircle = -(excess + 1.0).ln() / nf;
        }
        done = finish > 0.0;
    } else {
        done = geometry.max_distance <= w.d_enclosure;
        if done {
            finish = w.completion;
        }
    }
    let agents = (0..n)
        .map(|i| {
            let near = proximity_reward(
                state.agents[i].position,
                next.agents[i].velocity,
                state.evader.position,
                w,
            );
            AgentReward {
                near,
                track,
                encircle,
                full,
                finish,
                total: w.mu1 * near + w.mu2 * (track + encircle + full) + w.mu3 * finish,
            }
        })
        .collect();
    StepRewards {
        agents,
        done,
        geometry,
    }
}

/// Increase of the summed agent distances; the evader's competition reward.
pub fn ego_reward(state: &ArenaState, next: &ArenaState) -> f64 {
    next.distances().iter().sum::<f64>() - state.distances().iter().sum::<f64>()
}
