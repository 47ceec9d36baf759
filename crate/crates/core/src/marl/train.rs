use super::{
    perturb, Checkpoint, CheckpointMeta, CriticScope, Maddpg, NoiseSchedule, ReplayBuffer, Role, TrainMethod,
    Transition, UpdateConfig, CHECKPOINT_VERSION,
};
use crate::arena::{
    agent_rewards, arena_reset, arena_step, ego_reward, proximity_reward, scripted_evader_action, ActionBox,
    AgentAction, ArenaConfig, ArenaState, EvaderMode, RewardWeights,
};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: TrainMethod,
    pub agents: usize,
    pub episodes: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Environment steps between updates.
    pub update_every: usize,
    pub noise: NoiseSchedule,
    pub update: UpdateConfig,
    pub arena: ArenaConfig,
    pub reward: RewardWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: TrainMethod::Maddpg,
            agents: 3,
            episodes: 200,
            seed: 0,
            hidden: vec![128, 128],
            batch_size: 256,
            buffer_capacity: 100_000,
            warmup: 2_000,
            update_every: 8,
            noise: NoiseSchedule::default(),
            update: UpdateConfig::default(),
            arena: ArenaConfig::default(),
            reward: RewardWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents < 2 {
            return Err(Error::InvalidConfig("at least 2 agents are required".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.update_every == 0 {
            return Err(Error::InvalidConfig(
                "batch size, buffer capacity and update interval must be positive".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be positive".into()));
        }
        Ok(())
    }

    fn roles(&self) -> Vec<(Role, ActionBox)> {
        let mut roles: Vec<(Role, ActionBox)> = (0..self.agents).map(|i| (Role::Agent(i), ActionBox::AGENT)).collect();
        if self.arena.evader == EvaderMode::Learned {
            roles.push((Role::Evader, self.arena.evader_action));
        }
        roles
    }
}

/// Per-step result of one arena transition under a training method.
struct StepOutcome {
    next: ArenaState,
    rewards: Vec<f64>,
    done: bool,
    success: bool,
}

fn env_step(
    state: &ArenaState,
    actions: &[AgentAction],
    cfg: &TrainConfig,
) -> StepOutcome {
    let n = cfg.agents;
    let evader_action = match cfg.arena.evader {
        EvaderMode::Learned => actions[n],
        EvaderMode::Scripted => scripted_evader_action(state, &cfg.arena),
    };
    let next = arena_step(state, &actions[..n], evader_action, &cfg.arena);
    let capped = next.step >= cfg.arena.episode_cap;
    let mut rewards: Vec<f64>;
    let success;
    match cfg.method {
        TrainMethod::Maddpg => {
            let r = agent_rewards(state, &next, &cfg.reward);
            rewards = r.agents.iter().map(|a| a.total).collect();
            success = r.done;
        }
        TrainMethod::SingleRl => {
            let w = &cfg.reward;
            rewards = (0..n)
                .map(|i| {
                    let near = proximity_reward(
                        state.agents[i].position,
                        next.agents[i].velocity,
                        state.evader.position,
                        w,
                    );
                    let close = next.agents[i].position.distance(next.evader.position) <= w.d_enclosure;
                    w.mu1 * near + if close { w.mu3 * w.completion } else { 0.0 }
                })
                .collect();
            success = agent_rewards(state, &next, w).done;
        }
    }
    if cfg.arena.evader == EvaderMode::Learned {
        rewards.push(ego_reward(state, &next));
    }
    StepOutcome {
        next,
        rewards,
        done: success || capped,
        success,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub updates: usize,
    pub final_critic_loss: Vec<f64>,
}

/// Trains actors in the arena and returns their checkpoint.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(cfg, |_, _, _| {})
}

/// Like [`train`], calling `progress(episode, mean_return, success)` after
/// every episode.
pub fn train_with_progress<F: FnMut(usize, f64, bool)>(cfg: &TrainConfig, mut progress: F) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let roles = cfg.roles();
    let scope = match cfg.method {
        TrainMethod::Maddpg => CriticScope::Centralized,
        TrainMethod::SingleRl => CriticScope::Independent,
    };
    let mut model = Maddpg::new(cfg.agents, &roles, &cfg.hidden, scope, cfg.update, &mut rng);
    let mut noises = vec![cfg.noise; roles.len()];
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut reward_curve = Vec::with_capacity(cfg.episodes);
    let mut success_curve = Vec::with_capacity(cfg.episodes);
    let mut total_steps = 0usize;
    let mut updates = 0usize;
    let mut final_critic_loss = Vec::new();

    for episode in 0..cfg.episodes {
        let mut state = arena_reset(cfg.agents, &cfg.arena, &mut rng)?;
        let mut ret = 0.0;
        let success = loop {
            let flat = state.to_flat();
            let greedy = model.act(&flat)?;
            let actions: Vec<AgentAction> = greedy
                .iter()
                .zip(&roles)
                .zip(noises.iter_mut())
                .map(|((&a, (_, bx)), noise)| perturb(a, bx, noise.advance(), &mut rng))
                .collect();
            let out = env_step(&state, &actions, cfg);
            ret += out.rewards[..cfg.agents].iter().sum::<f64>() / cfg.agents as f64;
            buffer.push(Transition {
                state: flat,
                actions: actions.iter().flat_map(|a| [a.dvx, a.dvy]).collect(),
                rewards: out.rewards,
                next_state: out.next.to_flat(),
                dones: vec![out.success; roles.len()],
            });
            total_steps += 1;
            if buffer.len() >= cfg.warmup.max(cfg.batch_size) && total_steps % cfg.update_every == 0 {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                final_critic_loss = model.update(&batch)?.critic_loss;
                updates += 1;
            }
            state = out.next;
            if out.done {
                break out.success;
            }
        };
        reward_curve.push(ret);
        success_curve.push(success);
        progress(episode, ret, success);
    }

    let meta = CheckpointMeta {
        version: CHECKPOINT_VERSION,
        method: cfg.method,
        n_agents: cfg.agents,
        seed: cfg.seed,
        episodes: cfg.episodes,
        final_noise: noises[0].scale,
        reward_curve,
        success_curve,
        config: serde_json::to_value(cfg)?,
    };
    let actors = model.learners.iter().map(|l| (l.role, l.actor.clone())).collect();
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(meta, actors),
        updates,
        final_critic_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean length of successful episodes.
    pub mean_steps_to_success: Option<f64>,
}

/// Runs deterministic actors from `checkpoint` in the arena. The evader uses
/// its trained actor when present, otherwise the scripted one.
pub fn evaluate(checkpoint: &Checkpoint, arena: &ArenaConfig, reward: &RewardWeights, episodes: usize, seed: u64) -> Result<EvalReport> {
    let n = checkpoint.meta.n_agents;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    let mut steps_sum = 0usize;
    for _ in 0..episodes {
        let mut state = arena_reset(n, arena, &mut rng)?;
        loop {
            let flat = state.to_flat();
            let joint: Vec<AgentAction> = (0..n)
                .map(|i| checkpoint.agent_action(i, &Role::Agent(i).observe(&flat, n)))
                .collect::<Result<_>>()?;
            let evader = match (arena.evader, checkpoint.actor(Role::Evader)) {
                (EvaderMode::Learned, Some(a)) => a.forward(&Role::Evader.observe(&flat, n))?,
                _ => scripted_evader_action(&state, arena),
            };
            let next = arena_step(&state, &joint, evader, arena);
            let r = agent_rewards(&state, &next, reward);
            state = next;
            if r.done {
                successes += 1;
                steps_sum += state.step;
                break;
            }
            if state.step >= arena.episode_cap {
                break;
            }
        }
    }
    Ok(EvalReport {
        episodes,
        successes,
        success_rate: if episodes == 0 { 0.0 } else { successes as f64 / episodes as f64 },
        mean_steps_to_success: (successes > 0).then(|| steps_sum as f64 / successes as f64),
    })
}
