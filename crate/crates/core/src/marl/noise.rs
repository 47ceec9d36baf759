use serde::{Deserialize, Serialize};

/// Multiplicatively decaying exploration scale with a floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSchedule {
    pub scale: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            scale: 0.75,
            decay: 0.999995,
            floor: 0.01,
        }
    }
}

impl NoiseSchedule {
    /// Returns the scale in effect before advancing.
    pub fn advance(&mut self) -> f64 {
        let current = self.scale;
        self.scale = (self.scale * self.decay).max(self.floor);
        current
    }

    /// Scale after `steps` advances, in closed form.
    pub fn scale_after(&self, steps: u64) -> f64 {
        (self.scale * self.decay.powf(steps as f64)).max(self.floor)
    }

    /// Number of advances until the scale first reaches the floor.
    pub fn steps_to_floor(&self) -> u64 {
        if self.scale <= self.floor {
            return 0;
        }
        if self.decay >= 1.0 {
            return u64::MAX;
        }
        ((self.floor / self.scale).ln() / self.decay.ln()).ceil() as u64
    }
}
