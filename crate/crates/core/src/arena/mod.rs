//! Free-space training world for the surrounding-vehicle agents.
//!
//! Agents and the evader move in a normalized plane without road constraints.
//! `y` is the forward direction and `x` points to the right. Observations are
//! expressed relative to the evader so that the same actor can be driven from
//! ego-centred simulator coordinates.

mod enclosure;
mod reward;

pub use enclosure::{enclosure_geometry, EnclosureGeometry};
pub use reward::{agent_rewards, ego_reward, proximity_reward, AgentReward, RewardWeights, StepRewards};

use crate::error::{Error, Result};
use crate::sim::Vec2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Axis-aligned box bounding a 2D action or velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl ActionBox {
    /// Surrounding-vehicle action box: lateral change in [-0.1, 0.1], forward
    /// change in [0, 0.1].
    pub const AGENT: ActionBox = ActionBox {
        lo: [-0.1, 0.0],
        hi: [0.1, 0.1],
    };

    pub fn mid(&self, k: usize) -> f64 {
        0.5 * (self.lo[k] + self.hi[k])
    }

    pub fn half(&self, k: usize) -> f64 {
        0.5 * (self.hi[k] - self.lo[k])
    }

    pub fn clamp(&self, a: AgentAction) -> AgentAction {
        AgentAction {
            dvx: a.dvx.clamp(self.lo[0], self.hi[0]),
            dvy: a.dvy.clamp(self.lo[1], self.hi[1]),
        }
    }

    pub fn contains(&self, a: AgentAction) -> bool {
        (self.lo[0]..=self.hi[0]).contains(&a.dvx) && (self.lo[1]..=self.hi[1]).contains(&a.dvy)
    }

    fn clamp_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(v.x.clamp(self.lo[0], self.hi[0]), v.y.clamp(self.lo[1], self.hi[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentAction {
    pub dvx: f64,
    pub dvy: f64,
}

impl AgentAction {
    pub fn new(dvx: f64, dvy: f64) -> Self {
        Self { dvx, dvy }
    }
}

/// How an action changes the movement vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityUpdate {
    /// `v' = clamp(v + dv)`.
    Accumulate,
    /// `v' = clamp(dv)`: the action is the next movement vector. With
    /// forward-only actions, accumulation can never slow an agent down, so
    /// this is the default.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaderMode {
    /// Trained jointly against the agents on the distance-increase reward.
    Learned,
    /// Cruises forward with a slow lateral weave.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArenaConfig {
    /// Agents spawn uniformly in `[-half_extent, half_extent]^2`.
    pub half_extent: f64,
    /// Evader spawns uniformly within this distance of the origin (per axis).
    pub evader_spawn: f64,
    pub episode_cap: usize,
    pub velocity_update: VelocityUpdate,
    pub agent_velocity: ActionBox,
    pub evader_action: ActionBox,
    pub evader_velocity: ActionBox,
    pub evader: EvaderMode,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            half_extent: 1.0,
            evader_spawn: 0.1,
            episode_cap: 200,
            velocity_update: VelocityUpdate::Direct,
            agent_velocity: ActionBox::AGENT,
            evader_action: ActionBox {
                lo: [-0.05, 0.0],
                hi: [0.05, 0.05],
            },
            evader_velocity: ActionBox {
                lo: [-0.05, 0.02],
                hi: [0.05, 0.05],
            },
            evader: EvaderMode::Learned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Body {
    pub position: Vec2,
    pub velocity: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaState {
    pub agents: Vec<Body>,
    pub evader: Body,
    pub step: usize,
}

impl ArenaState {
    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_positions(&self) -> Vec<Vec2> {
        self.agents.iter().map(|a| a.position).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.agents
            .iter()
            .map(|a| a.position.distance(self.evader.position))
            .collect()
    }

    /// `[p_1, v_1, .., p_n, v_n, p_e, v_e]`, 4n + 4 values.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(flat_dim(self.n()));
        for b in self.agents.iter().chain(std::iter::once(&self.evader)) {
            out.extend([b.position.x, b.position.y, b.velocity.x, b.velocity.y]);
        }
        out
    }
}

pub fn flat_dim(n: usize) -> usize {
    4 * (n + 1)
}

/// Observation of agent `i`: its own relative position and
/// movement, the other agents' in cyclic order starting at `i + 1`, then the
/// evader position, all relative to the evader. `4n + 2` values.
pub fn agent_obs_dim(n: usize) -> usize {
    4 * n + 2
}

/// Evader movement followed by every agent's relative position and movement.
pub fn evader_obs_dim(n: usize) -> usize {
    4 * n + 2
}

/// Centralized-critic view: agents' relative positions and movements, then
/// the evader movement.
pub fn critic_state_dim(n: usize) -> usize {
    4 * n + 2
}

fn body(flat: &[f64], k: usize) -> [f64; 4] {
    [flat[4 * k], flat[4 * k + 1], flat[4 * k + 2], flat[4 * k + 3]]
}

pub fn agent_observation_into(flat: &[f64], n: usize, i: usize, out: &mut [f64]) {
    let e = body(flat, n);
    for (slot, j) in (0..n).map(|k| (i + k) % n).enumerate() {
        let b = body(flat, j);
        out[4 * slot..4 * slot + 4].copy_from_slice(&[b[0] - e[0], b[1] - e[1], b[2], b[3]]);
    }
    out[4 * n] = 0.0;
    out[4 * n + 1] = 0.0;
}

pub fn evader_observation_into(flat: &[f64], n: usize, out: &mut [f64]) {
    let e = body(flat, n);
    out[0] = e[2];
    out[1] = e[3];
    for j in 0..n {
        let b = body(flat, j);
        out[2 + 4 * j..6 + 4 * j].copy_from_slice(&[b[0] - e[0], b[1] - e[1], b[2], b[3]]);
    }
}

pub fn critic_state_into(flat: &[f64], n: usize, out: &mut [f64]) {
    let e = body(flat, n);
    for j in 0..n {
        let b = body(flat, j);
        out[4 * j..4 * j + 4].copy_from_slice(&[b[0] - e[0], b[1] - e[1], b[2], b[3]]);
    }
    out[4 * n] = e[2];
    out[4 * n + 1] = e[3];
}

pub fn agent_observation(state: &ArenaState, i: usize) -> Vec<f64> {
    let n = state.n();
    let mut out = vec![0.0; agent_obs_dim(n)];
    agent_observation_into(&state.to_flat(), n, i, &mut out);
    out
}

pub fn evader_observation(state: &ArenaState) -> Vec<f64> {
    let n = state.n();
    let mut out = vec![0.0; evader_obs_dim(n)];
    evader_observation_into(&state.to_flat(), n, &mut out);
    out
}

/// Places `n` agents uniformly in the arena box and the evader near the
/// centre; every movement vector starts at zero.
pub fn arena_reset<R: Rng + ?Sized>(n: usize, cfg: &ArenaConfig, rng: &mut R) -> Result<ArenaState> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "encirclement needs at least 2 agents, got {n}"
        )));
    }
    let h = cfg.half_extent;
    let agents = (0..n)
        .map(|_| Body {
            position: Vec2::new(rng.random_range(-h..=h), rng.random_range(-h..=h)),
            velocity: Vec2::ZERO,
        })
        .collect();
    let r = cfg.evader_spawn;
    let evader = Body {
        position: Vec2::new(rng.random_range(-r..=r), rng.random_range(-r..=r)),
        velocity: Vec2::ZERO,
    };
    Ok(ArenaState {
        agents,
        evader,
        step: 0,
    })
}

fn advance(body: &Body, action: AgentAction, velocity_box: &ActionBox, mode: VelocityUpdate) -> Body {
    let dv = Vec2::new(action.dvx, action.dvy);
    let raw = match mode {
        VelocityUpdate::Accumulate => body.velocity + dv,
        VelocityUpdate::Direct => dv,
    };
    let velocity = velocity_box.clamp_vec(raw);
    Body {
        position: body.position + velocity,
        velocity,
    }
}

/// One arena step: movement vectors are updated by the actions and clamped,
/// then positions advance by the new movement vectors.
pub fn arena_step(state: &ArenaState, joint: &[AgentAction], evader: AgentAction, cfg: &ArenaConfig) -> ArenaState {
    assert_eq!(joint.len(), state.n(), "one action per agent");
    let agents = state
        .agents
        .iter()
        .zip(joint)
        .map(|(b, &a)| advance(b, a, &cfg.agent_velocity, cfg.velocity_update))
        .collect();
    ArenaState {
        agents,
        evader: advance(&state.evader, evader, &cfg.evader_velocity, cfg.velocity_update),
        step: state.step + 1,
    }
}

/// Action of the scripted evader at `step`.
pub fn scripted_evader_action(state: &ArenaState, cfg: &ArenaConfig) -> AgentAction {
    let target = Vec2::new(
        0.6 * cfg.evader_velocity.hi[0] * (state.step as f64 / 15.0).sin(),
        cfg.evader_velocity.mid(1),
    );
    let dv = match cfg.velocity_update {
        VelocityUpdate::Accumulate => target - state.evader.velocity,
        VelocityUpdate::Direct => target,
    };
    cfg.evader_action.clamp(AgentAction::new(dv.x, dv.y))
}
