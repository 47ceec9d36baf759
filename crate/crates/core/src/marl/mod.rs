//! Multi-agent deep deterministic policy gradient.

mod actor;
mod buffer;
mod checkpoint;
mod maddpg;
pub mod mlp;
mod noise;
mod train;

pub use actor::{perturb, squash, Actor};
pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{round_to_f32, ActorMeta, Checkpoint, CheckpointMeta, TrainMethod, CHECKPOINT_VERSION};
pub use maddpg::{CriticScope, Learner, Maddpg, Role, UpdateConfig, UpdateStats};
pub use mlp::{Adam, Gradients, Mlp};
pub use noise::NoiseSchedule;
pub use train::{evaluate, train, train_with_progress, EvalReport, TrainConfig, TrainOutcome};
