use super::{Mlp, NoiseSchedule};
use crate::arena::{ActionBox, AgentAction};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Decentralized policy: an MLP whose two outputs are squashed into an action box.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub action_box: ActionBox,
}

/// `mid + half * tanh(z)` per component.
pub fn squash(z: [f64; 2], b: &ActionBox) -> AgentAction {
    AgentAction::new(b.mid(0) + b.half(0) * z[0].tanh(), b.mid(1) + b.half(1) * z[1].tanh())
}

impl Actor {
    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn forward(&self, obs: &[f64]) -> Result<AgentAction> {
        if obs.len() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        let z = self.net.forward_one(obs);
        Ok(squash([z[0], z[1]], &self.action_box))
    }

    /// Actor output plus Gaussian noise of std `scale * half-width`, clamped
    /// to the box. Advances the schedule.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        noise: &mut NoiseSchedule,
        rng: &mut R,
    ) -> Result<AgentAction> {
        let a = self.forward(obs)?;
        let scale = noise.advance();
        Ok(perturb(a, &self.action_box, scale, rng))
    }
}

pub fn perturb<R: Rng + ?Sized>(a: AgentAction, b: &ActionBox, scale: f64, rng: &mut R) -> AgentAction {
    let nx: f64 = StandardNormal.sample(rng);
    let ny: f64 = StandardNormal.sample(rng);
    b.clamp(AgentAction::new(
        a.dvx + nx * scale * b.half(0),
        a.dvy + ny * scale * b.half(1),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_output_layer_gives_box_centre() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[4, 8, 2], &mut rng);
        let last = net.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        let actor = Actor {
            net,
            action_box: ActionBox::AGENT,
        };
        let a = actor.forward(&[0.3, -1.0, 2.0, 0.1]).unwrap();
        assert_eq!(a, AgentAction::new(0.0, 0.05));
    }

    #[test]
    fn dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor {
            net: Mlp::new(&[4, 8, 2], &mut rng),
            action_box: ActionBox::AGENT,
        };
        assert!(matches!(
            actor.forward(&[0.0; 3]),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn large_raw_action_is_clamped() {
        let a = ActionBox::AGENT.clamp(AgentAction::new(0.5, 0.2));
        assert_eq!(a, AgentAction::new(0.1, 0.1));
    }
}
