use super::{squash, Actor, Adam, Mlp, Transition};
use crate::arena::{
    agent_obs_dim, agent_observation_into, critic_state_dim, critic_state_into, evader_obs_dim,
    evader_observation_into, ActionBox, AgentAction,
};
use crate::error::{Error, Result};
use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Who a learner controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Agent(usize),
    Evader,
}

impl Role {
    pub fn obs_dim(self, n: usize) -> usize {
        match self {
            Role::Agent(_) => agent_obs_dim(n),
            Role::Evader => evader_obs_dim(n),
        }
    }

    pub fn observe_into(self, flat: &[f64], n: usize, out: &mut [f64]) {
        match self {
            Role::Agent(i) => agent_observation_into(flat, n, i, out),
            Role::Evader => evader_observation_into(flat, n, out),
        }
    }

    pub fn observe(self, flat: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.obs_dim(n)];
        self.observe_into(flat, n, &mut out);
        out
    }
}

/// What each critic conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticScope {
    /// Joint state and every learner's action.
    Centralized,
    /// Own observation and own action only.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Max global gradient norm per network update.
    pub grad_clip: f64,
    /// Penalty on squared pre-squash actor outputs.
    pub actor_reg: f64,
    /// Training aborts once the mean absolute Q estimate exceeds this.
    pub divergence_q: f64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            tau: 0.01,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            grad_clip: 0.5,
            actor_reg: 1e-3,
            divergence_q: 1e4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Learner {
    pub role: Role,
    pub actor: Actor,
    pub target_actor: Mlp,
    pub critic: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: Vec<f64>,
    pub actor_loss: Vec<f64>,
    pub mean_abs_q: f64,
}

#[derive(Debug, Clone)]
pub struct Maddpg {
    pub n_agents: usize,
    pub scope: CriticScope,
    pub learners: Vec<Learner>,
    pub config: UpdateConfig,
}

impl Maddpg {
    pub fn new<R: Rng + ?Sized>(
        n_agents: usize,
        roles: &[(Role, ActionBox)],
        hidden: &[usize],
        scope: CriticScope,
        config: UpdateConfig,
        rng: &mut R,
    ) -> Self {
        let joint_actions = 2 * roles.len();
        let learners = roles
            .iter()
            .map(|&(role, action_box)| {
                let obs = role.obs_dim(n_agents);
                let critic_in = match scope {
                    CriticScope::Centralized => critic_state_dim(n_agents) + joint_actions,
                    CriticScope::Independent => obs + 2,
                };
                let mut sizes = vec![obs];
                sizes.extend_from_slice(hidden);
                sizes.push(2);
                let actor = Mlp::new(&sizes, rng);
                let mut csizes = vec![critic_in];
                csizes.extend_from_slice(hidden);
                csizes.push(1);
                let critic = Mlp::new(&csizes, rng);
                Learner {
                    role,
                    target_actor: actor.clone(),
                    target_critic: critic.clone(),
                    actor_opt: Adam::new(&actor, config.lr_actor),
                    critic_opt: Adam::new(&critic, config.lr_critic),
                    actor: Actor { net: actor, action_box },
                    critic,
                }
            })
            .collect();
        Self {
            n_agents,
            scope,
            learners,
            config,
        }
    }

    /// Deterministic actions of every learner for a flattened arena state.
    pub fn act(&self, flat: &[f64]) -> Result<Vec<AgentAction>> {
        self.learners
            .iter()
            .map(|l| l.actor.forward(&l.role.observe(flat, self.n_agents)))
            .collect()
    }

    fn observations(&self, role: Role, states: &[&[f64]]) -> Array2<f64> {
        let d = role.obs_dim(self.n_agents);
        let mut out = Array2::zeros((states.len(), d));
        for (mut row, s) in out.rows_mut().into_iter().zip(states) {
            role.observe_into(s, self.n_agents, row.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn critic_states(&self, states: &[&[f64]]) -> Array2<f64> {
        let mut out = Array2::zeros((states.len(), critic_state_dim(self.n_agents)));
        for (mut row, s) in out.rows_mut().into_iter().zip(states) {
            critic_state_into(s, self.n_agents, row.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn critic_input(&self, j: usize, cs: &Array2<f64>, obs: &[Array2<f64>], actions: &Array2<f64>) -> Array2<f64> {
        match self.scope {
            CriticScope::Centralized => concatenate![Axis(1), *cs, *actions],
            CriticScope::Independent => {
                concatenate![Axis(1), obs[j], actions.slice(s![.., 2 * j..2 * j + 2])]
            }
        }
    }

    /// Offset of learner `j`'s action inside its critic input.
    fn action_offset(&self, j: usize) -> usize {
        match self.scope {
            CriticScope::Centralized => critic_state_dim(self.n_agents) + 2 * j,
            CriticScope::Independent => self.learners[j].role.obs_dim(self.n_agents),
        }
    }

    /// One gradient step for every critic and actor on `batch`, followed by
    /// soft target updates.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        let b = batch.len();
        let l = self.learners.len();
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let next_states: Vec<&[f64]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
        let obs: Vec<Array2<f64>> = self.learners.iter().map(|x| self.observations(x.role, &states)).collect();
        let next_obs: Vec<Array2<f64>> =
            self.learners.iter().map(|x| self.observations(x.role, &next_states)).collect();
        let (cs, next_cs) = match self.scope {
            CriticScope::Centralized => (self.critic_states(&states), self.critic_states(&next_states)),
            CriticScope::Independent => (Array2::zeros((0, 0)), Array2::zeros((0, 0))),
        };
        let actions = Array2::from_shape_fn((b, 2 * l), |(r, c)| batch[r].actions[c]);
        let mut next_actions = Array2::zeros((b, 2 * l));
        for (j, learner) in self.learners.iter().enumerate() {
            let z = learner.target_actor.forward(next_obs[j].view());
            let bx = &learner.actor.action_box;
            for r in 0..b {
                let a = squash([z[[r, 0]], z[[r, 1]]], bx);
                next_actions[[r, 2 * j]] = a.dvx;
                next_actions[[r, 2 * j + 1]] = a.dvy;
            }
        }

        let cfg = self.config;
        let mut stats = UpdateStats {
            critic_loss: Vec::with_capacity(l),
            actor_loss: Vec::with_capacity(l),
            mean_abs_q: 0.0,
        };
        for j in 0..l {
            let x = self.critic_input(j, &cs, &obs, &actions);
            let x_next = self.critic_input(j, &next_cs, &next_obs, &next_actions);
            let q_next = self.learners[j].target_critic.forward(x_next.view());
            let y = Array2::from_shape_fn((b, 1), |(r, _)| {
                let t = batch[r];
                let cont = if t.dones[j] { 0.0 } else { 1.0 };
                t.rewards[j] + cfg.gamma * cont * q_next[[r, 0]]
            });

            let learner = &mut self.learners[j];
            let (q, cache) = learner.critic.forward_cached(x.view());
            let err = &q - &y;
            stats.critic_loss.push(err.mapv(|e| e * e).mean().unwrap_or(0.0));
            stats.mean_abs_q += q.mapv(f64::abs).mean().unwrap_or(0.0) / l as f64;
            let (mut grads, _) = learner.critic.backward(&cache, &(err * (2.0 / b as f64)));
            grads.clip_norm(cfg.grad_clip);
            learner.critic_opt.step(&mut learner.critic, &grads);

            let (z, acache) = learner.actor.net.forward_cached(obs[j].view());
            let bx = learner.actor.action_box;
            let mut policy_actions = actions.clone();
            for r in 0..b {
                let a = squash([z[[r, 0]], z[[r, 1]]], &bx);
                policy_actions[[r, 2 * j]] = a.dvx;
                policy_actions[[r, 2 * j + 1]] = a.dvy;
            }
            let x_pi = self.critic_input(j, &cs, &obs, &policy_actions);
            let learner = &mut self.learners[j];
            let (q_pi, ccache) = learner.critic.forward_cached(x_pi.view());
            let reg = cfg.actor_reg * z.mapv(|v| v * v).mean().unwrap_or(0.0);
            stats.actor_loss.push(-q_pi.mean().unwrap_or(0.0) + reg);
            let (_, gin) = learner.critic.backward(&ccache, &Array2::from_elem((b, 1), -1.0 / b as f64));
            let off = self.action_offset(j);
            let learner = &mut self.learners[j];
            let n_z = z.len() as f64;
            let dz = Array2::from_shape_fn((b, 2), |(r, k)| {
                let th = z[[r, k]].tanh();
                gin[[r, off + k]] * bx.half(k) * (1.0 - th * th) + 2.0 * cfg.actor_reg * z[[r, k]] / n_z
            });
            let (mut agrads, _) = learner.actor.net.backward(&acache, &dz);
            agrads.clip_norm(cfg.grad_clip);
            learner.actor_opt.step(&mut learner.actor.net, &agrads);
        }

        for learner in &mut self.learners {
            learner.target_actor.soft_update(&learner.actor.net, cfg.tau);
            learner.target_critic.soft_update(&learner.critic, cfg.tau);
            if !learner.actor.net.is_finite() || !learner.critic.is_finite() {
                return Err(Error::Diverged(format!("non-finite parameters in {:?}", learner.role)));
            }
        }
        if !stats.mean_abs_q.is_finite() || stats.mean_abs_q > cfg.divergence_q {
            return Err(Error::Diverged(format!("mean |Q| = {}", stats.mean_abs_q)));
        }
        if stats.critic_loss.iter().chain(&stats.actor_loss).any(|v| !v.is_finite()) {
            return Err(Error::Diverged("non-finite loss".into()));
        }
        Ok(stats)
    }
}
