//! Online fuzzer: maps actor outputs to maneuvers, runs action patterns
//! when a surrounding vehicle enters a trigger zone, and filters every
//! maneuver through the driving-behavior constraints.

mod mapping;
mod pattern;
mod trigger;

pub use mapping::{map_action_to_maneuver, nominal_movement, ACCEL_THRESHOLD, LATERAL_THRESHOLD};
pub use pattern::{compile_pattern, Branch, PatternState, Predicate, Segment};
pub use trigger::{classify_trigger, PatternKind, Relation};

use crate::arena::{agent_obs_dim, agent_observation_into, flat_dim};
use crate::error::Result;
use crate::marl::Checkpoint;
use crate::sim::{is_within_boundary, min_neighbor_distance, Maneuver, RoadNetwork, Vec2, VehicleState, WorldState};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzerConfig {
    /// Front trigger distance, also the longitudinal arena scale, m.
    pub d_safe: f64,
    /// Constraint and attribution distance, m.
    pub d_constraint: f64,
    /// Bumper gap under which a vehicle behind in an adjacent lane triggers, m.
    pub side_behind_range: f64,
    pub pattern_horizon: usize,
    pub k_brk: usize,
    pub k_dec: usize,
    /// Steps a pattern spends on one lane change.
    pub lane_change_steps: usize,
    /// Chance of re-triggering a pattern right after one completes.
    pub retrigger_probability: f64,
    /// Forward movement removed per consecutive decelerate decision, so a
    /// sustained slow-down request turns into braking.
    pub decelerate_streak_penalty: f64,
    /// Steps a released vehicle stays with the actor before it can trigger again.
    pub release_cooldown: usize,
    /// Run action patterns; disabled for the independent-RL baseline.
    pub patterns: bool,
}

impl Default for FuzzerConfig {
    fn default() -> Self {
        Self {
            d_safe: 3.5,
            d_constraint: 2.0,
            side_behind_range: 15.0,
            pattern_horizon: 100,
            k_brk: 15,
            k_dec: 15,
            lane_change_steps: 15,
            retrigger_probability: 0.5,
            decelerate_streak_penalty: 0.01,
            release_cooldown: 20,
            patterns: true,
        }
    }
}

/// Driving-behavior constraint: brake when another vehicle is closer than
/// `d_constraint` (centre distance) or the footprint leaves the road.
/// Returns the maneuver to execute and whether it was overridden.
pub fn apply_constraints(
    maneuver: Maneuver,
    sv_id: usize,
    world: &WorldState,
    network: &RoadNetwork,
    cfg: &FuzzerConfig,
) -> (Maneuver, bool) {
    let Some(sv) = world.vehicle(sv_id) else {
        return (maneuver, false);
    };
    let crowded = min_neighbor_distance(world, sv_id).is_some_and(|d| d < cfg.d_constraint);
    if crowded || !is_within_boundary(sv, network) {
        (Maneuver::Brake, maneuver != Maneuver::Brake)
    } else {
        (maneuver, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by")]
pub enum Owner {
    Marl,
    Pattern(Box<PatternState>),
}

impl Owner {
    pub fn pattern(&self) -> Option<PatternKind> {
        match self {
            Owner::Marl => None,
            Owner::Pattern(p) => Some(p.kind),
        }
    }
}

/// Who produced a maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Marl,
    Pattern(PatternKind),
    Random,
    Sequence,
    Script,
}

/// Final decision for one surrounding vehicle in one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvDecision {
    pub id: usize,
    pub proposed: Maneuver,
    pub maneuver: Maneuver,
    pub source: Source,
    pub overridden: bool,
}

/// Notable fuzzer events recorded into traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum FuzzEvent {
    Triggered { id: usize, kind: PatternKind, branch: Branch, substituted: bool },
    Completed { id: usize, kind: PatternKind, steps: usize, forced: bool },
    Released { id: usize },
}

/// Translates simulator states into the evader-centred arena frame the
/// actors were trained in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    /// Last movement vector per surrounding vehicle, arena units.
    pub movement: Vec<Vec2>,
    /// Consecutive decelerate decisions per surrounding vehicle.
    pub decel_streak: Vec<usize>,
}

impl Bridge {
    pub fn new(n: usize) -> Self {
        Self {
            movement: vec![Vec2::ZERO; n],
            decel_streak: vec![0; n],
        }
    }

    /// Arena position of a vehicle relative to the ego: forward is `+y`
    /// scaled by `2 d_safe`, right is `+x` scaled by the lane width.
    pub fn arena_position(sv: &VehicleState, ego: &VehicleState, lane_width: f64, cfg: &FuzzerConfig) -> Vec2 {
        Vec2::new(
            -(sv.frenet.d - ego.frenet.d) / lane_width,
            (sv.frenet.s - ego.frenet.s) / (2.0 * cfg.d_safe),
        )
    }

    /// Flattened arena state with the ego as the evader at the origin.
    pub fn flat_state(&self, world: &WorldState, network: &RoadNetwork, cfg: &FuzzerConfig) -> Vec<f64> {
        let n = world.surrounding.len();
        let mut flat = Vec::with_capacity(flat_dim(n));
        for (sv, v) in world.surrounding.iter().zip(&self.movement) {
            let p = Self::arena_position(sv, &world.ego, network.lane_width, cfg);
            flat.extend([p.x, p.y, v.x, v.y]);
        }
        flat.extend([0.0; 4]);
        flat
    }

    /// Observation of surrounding vehicle `i`.
    pub fn observation(&self, i: usize, world: &WorldState, network: &RoadNetwork, cfg: &FuzzerConfig) -> Vec<f64> {
        let n = world.surrounding.len();
        let mut out = vec![0.0; agent_obs_dim(n)];
        agent_observation_into(&self.flat_state(world, network, cfg), n, i, &mut out);
        out
    }

    /// Maps an actor movement vector to a maneuver, applying the
    /// decelerate-streak penalty, and records the movement.
    pub fn map_actor_output(&mut self, i: usize, v: Vec2, cfg: &FuzzerConfig) -> Maneuver {
        let penalty = cfg.decelerate_streak_penalty * self.decel_streak[i] as f64;
        let m = map_action_to_maneuver(Vec2::new(v.x, v.y - penalty));
        self.movement[i] = v;
        self.note(i, m);
        m
    }

    /// Records a maneuver chosen by something other than the actor.
    pub fn record(&mut self, i: usize, m: Maneuver) {
        self.movement[i] = nominal_movement(m);
        self.note(i, m);
    }

    fn note(&mut self, i: usize, m: Maneuver) {
        if m == Maneuver::Decelerate {
            self.decel_streak[i] += 1;
        } else {
            self.decel_streak[i] = 0;
        }
    }
}

/// Per-episode fuzzer state for all surrounding vehicles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzerState {
    pub owners: Vec<Owner>,
    pub bridge: Bridge,
    /// Remaining steps before a released vehicle may trigger again.
    pub cooldown: Vec<usize>,
}

impl FuzzerState {
    pub fn new(n: usize) -> Self {
        Self {
            owners: vec![Owner::Marl; n],
            bridge: Bridge::new(n),
            cooldown: vec![0; n],
        }
    }
}

/// One online-fuzzing step: pattern-owned vehicles advance their pattern,
/// vehicles entering a trigger zone start one, the rest follow the actor.
/// Every maneuver then passes the constraints. Crashed vehicles (listed in
/// `frozen`) are skipped.
pub fn orchestrate_step<R: Rng + ?Sized>(
    world: &WorldState,
    network: &RoadNetwork,
    state: &mut FuzzerState,
    checkpoint: &Checkpoint,
    cfg: &FuzzerConfig,
    frozen: &[bool],
    rng: &mut R,
    events: &mut Vec<FuzzEvent>,
) -> Result<Vec<SvDecision>> {
    let n = world.surrounding.len();
    checkpoint.require_agents(n)?;
    let flat = state.bridge.flat_state(world, network, cfg);
    let mut decisions = Vec::with_capacity(n);
    for i in 0..n {
        let sv = &world.surrounding[i];
        if frozen.get(i).copied().unwrap_or(false) {
            continue;
        }
        let mut proposal: Option<(Maneuver, Source)> = None;
        if cfg.patterns {
            if let Owner::Pattern(p) = &mut state.owners[i] {
                let kind = p.kind;
                match p.advance(sv, &world.ego, cfg) {
                    Some(m) => proposal = Some((m, Source::Pattern(kind))),
                    None => {
                        events.push(FuzzEvent::Completed {
                            id: sv.id,
                            kind,
                            steps: p.steps(),
                            forced: p.forced,
                        });
                        let again = classify_trigger(sv, &world.ego, cfg).is_some()
                            && rng.random_bool(cfg.retrigger_probability);
                        state.owners[i] = Owner::Marl;
                        if !again {
                            events.push(FuzzEvent::Released { id: sv.id });
                            state.cooldown[i] = cfg.release_cooldown;
                            proposal = Some(marl_proposal(i, &flat, n, checkpoint, &mut state.bridge, cfg)?);
                        }
                    }
                }
            }
            let cooling = state.cooldown[i] > 0;
            state.cooldown[i] = state.cooldown[i].saturating_sub(1);
            if proposal.is_none() && !cooling && matches!(state.owners[i], Owner::Marl) {
                if let Some(kind) = classify_trigger(sv, &world.ego, cfg) {
                    let mut p = compile_pattern(kind, sv, &world.ego, network, cfg, rng);
                    events.push(FuzzEvent::Triggered {
                        id: sv.id,
                        kind,
                        branch: p.branch,
                        substituted: p.substituted,
                    });
                    if let Some(m) = p.advance(sv, &world.ego, cfg) {
                        proposal = Some((m, Source::Pattern(kind)));
                        state.owners[i] = Owner::Pattern(Box::new(p));
                    } else {
                        events.push(FuzzEvent::Completed {
                            id: sv.id,
                            kind,
                            steps: 0,
                            forced: p.forced,
                        });
                    }
                }
            }
            if let Some((m, Source::Pattern(_))) = proposal {
                state.bridge.record(i, m);
            }
        }
        let (proposed, source) = match proposal {
            Some(p) => p,
            None => marl_proposal(i, &flat, n, checkpoint, &mut state.bridge, cfg)?,
        };
        let (maneuver, overridden) = apply_constraints(proposed, sv.id, world, network, cfg);
        decisions.push(SvDecision {
            id: sv.id,
            proposed,
            maneuver,
            source,
            overridden,
        });
    }
    Ok(decisions)
}

fn marl_proposal(
    i: usize,
    flat: &[f64],
    n: usize,
    checkpoint: &Checkpoint,
    bridge: &mut Bridge,
    cfg: &FuzzerConfig,
) -> Result<(Maneuver, Source)> {
    let mut obs = vec![0.0; agent_obs_dim(n)];
    agent_observation_into(flat, n, i, &mut obs);
    let a = checkpoint.agent_action(i, &obs)?;
    Ok((bridge.map_actor_output(i, Vec2::new(a.dvx, a.dvy), cfg), Source::Marl))
}
