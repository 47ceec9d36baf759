//! Binary checkpoint: magic, version, JSON header, little-endian f32 body.

use super::{Actor, Mlp, Role};
use crate::arena::{agent_obs_dim, ActionBox, AgentAction};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 8] = b"MARLOTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMethod {
    /// Centralized critics, cooperative staged reward.
    Maddpg,
    /// Independent critics, individual proximity reward.
    SingleRl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorMeta {
    pub role: Role,
    pub sizes: Vec<usize>,
    pub action_box: ActionBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub method: TrainMethod,
    pub n_agents: usize,
    pub seed: u64,
    pub episodes: usize,
    pub final_noise: f64,
    /// Mean per-agent return of each training episode.
    pub reward_curve: Vec<f64>,
    /// Whether each training episode ended in completion.
    pub success_curve: Vec<bool>,
    /// Free-form training configuration snapshot.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub actors: Vec<(Role, Actor)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: CheckpointMeta,
    actors: Vec<ActorMeta>,
    body_sha256: String,
}

/// Rounds every parameter to the nearest f32 so that storage is lossless.
pub fn round_to_f32(net: &Mlp) -> Mlp {
    let mut out = net.clone();
    let p: Vec<f64> = net.params().iter().map(|&x| x as f32 as f64).collect();
    out.set_params(&p);
    out
}

impl Checkpoint {
    pub fn new(meta: CheckpointMeta, actors: Vec<(Role, Actor)>) -> Self {
        let actors = actors
            .into_iter()
            .map(|(role, a)| {
                (
                    role,
                    Actor {
                        net: round_to_f32(&a.net),
                        action_box: a.action_box,
                    },
                )
            })
            .collect();
        Self { meta, actors }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let body: Vec<u8> = self
            .actors
            .iter()
            .flat_map(|(_, a)| a.net.params())
            .flat_map(|x| (x as f32).to_le_bytes())
            .collect();
        let header = Header {
            meta: self.meta.clone(),
            actors: self
                .actors
                .iter()
                .map(|(role, a)| ActorMeta {
                    role: *role,
                    sizes: a.net.sizes(),
                    action_box: a.action_box,
                })
                .collect(),
            body_sha256: hex::encode(Sha256::digest(&body)),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(20 + json.len() + body.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |why: &str| Error::CorruptCheckpoint(why.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body_start = 20usize.checked_add(hlen).ok_or_else(|| corrupt("header length"))?;
        if body_start > bytes.len() {
            return Err(corrupt("truncated header"));
        }
        let header: Header =
            serde_json::from_slice(&bytes[20..body_start]).map_err(|e| corrupt(&format!("header: {e}")))?;
        let body = &bytes[body_start..];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut nets: Vec<Mlp> = header.actors.iter().map(|m| Mlp::new(&m.sizes, &mut rng)).collect();
        let expected: usize = nets.iter().map(|n| 4 * n.num_params()).sum();
        if body.len() != expected {
            return Err(corrupt(&format!("body is {} bytes, expected {expected}", body.len())));
        }
        if hex::encode(Sha256::digest(body)) != header.body_sha256 {
            return Err(corrupt("body checksum mismatch"));
        }
        let mut floats = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        for net in &mut nets {
            let p: Vec<f64> = floats.by_ref().take(net.num_params()).collect();
            net.set_params(&p);
        }
        let actors = header
            .actors
            .iter()
            .zip(nets)
            .map(|(m, net)| {
                (
                    m.role,
                    Actor {
                        net,
                        action_box: m.action_box,
                    },
                )
            })
            .collect();
        Ok(Self {
            meta: header.meta,
            actors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Fails unless the checkpoint was trained with `n` agents.
    pub fn require_agents(&self, n: usize) -> Result<()> {
        if self.meta.n_agents != n {
            return Err(Error::DimensionMismatch {
                expected: agent_obs_dim(n),
                got: agent_obs_dim(self.meta.n_agents),
            });
        }
        Ok(())
    }

    pub fn actor(&self, role: Role) -> Option<&Actor> {
        self.actors.iter().find(|(r, _)| *r == role).map(|(_, a)| a)
    }

    /// Deterministic action of agent `i` for its observation.
    pub fn agent_action(&self, i: usize, obs: &[f64]) -> Result<AgentAction> {
        self.actor(Role::Agent(i))
            .ok_or_else(|| Error::InvalidConfig(format!("checkpoint has no actor for agent {i}")))?
            .forward(obs)
    }
}
