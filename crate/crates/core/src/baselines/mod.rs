//! Comparison methods: uniform random maneuvers, NSGA-II search over
//! maneuver sequences, and independently trained single-agent actors.

pub mod ga;

pub use ga::{
    crossover, crowding_distance, dominates, mutate, non_dominated_sort, nsga2, offspring, select_survivors,
    Chromosome, Evaluation, GaConfig, Generation, VIOLATION_SCORE,
};

use crate::error::{Error, Result};
use crate::fuzzer::{Bridge, FuzzerConfig};
use crate::marl::{train_with_progress, Checkpoint, TrainConfig, TrainMethod, TrainOutcome};
use crate::sim::{Maneuver, RoadNetwork, Vec2, WorldState};
use rand::Rng;

/// One uniformly random maneuver per surrounding vehicle.
pub fn random_policy_step<R: Rng + ?Sized>(vehicles: usize, rng: &mut R) -> Vec<Maneuver> {
    (0..vehicles)
        .map(|_| Maneuver::ALL[rng.random_range(0..Maneuver::ALL.len())])
        .collect()
}

/// Trains independent actors with individual critics and proximity rewards.
pub fn single_rl_train<F: FnMut(usize, f64, bool)>(cfg: &TrainConfig, progress: F) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        method: TrainMethod::SingleRl,
        ..cfg.clone()
    };
    train_with_progress(&cfg, progress)
}

/// Maneuver proposed by single-agent actor `i`, before constraints.
pub fn single_rl_step(
    world: &WorldState,
    network: &RoadNetwork,
    bridge: &mut Bridge,
    checkpoint: &Checkpoint,
    i: usize,
    cfg: &FuzzerConfig,
) -> Result<Maneuver> {
    if checkpoint.meta.method != TrainMethod::SingleRl {
        return Err(Error::InvalidConfig("checkpoint was not trained as single-agent RL".into()));
    }
    let obs = bridge.observation(i, world, network, cfg);
    let a = checkpoint.agent_action(i, &obs)?;
    Ok(bridge.map_actor_output(i, Vec2::new(a.dvx, a.dvy), cfg))
}
