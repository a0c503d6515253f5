use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::frames::{EnuPoint, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnssConfig {
    pub sigma_h: f64,
    pub sigma_v: f64,
    pub sigma_yaw_deg: f64,
    /// Correlation time of the first-order Gauss-Markov error; 0 gives white noise.
    pub tau_s: f64,
}

impl Default for GnssConfig {
    fn default() -> Self {
        Self { sigma_h: 0.3, sigma_v: 0.5, sigma_yaw_deg: 1.0, tau_s: 120.0 }
    }
}

impl GnssConfig {
    pub fn noiseless() -> Self {
        Self { sigma_h: 0.0, sigma_v: 0.0, sigma_yaw_deg: 0.0, tau_s: 0.0 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            sigma_h: self.sigma_h * factor,
            sigma_v: self.sigma_v * factor,
            sigma_yaw_deg: self.sigma_yaw_deg * factor,
            ..self
        }
    }
}

/// Stationary GNSS error process: per-axis Gauss-Markov noise with the
/// configured marginal standard deviations.
#[derive(Clone, Debug)]
pub struct GnssNoise {
    cfg: GnssConfig,
    rng: ChaCha8Rng,
    // unit-variance states for e, n, u, yaw
    state: [f64; 4],
    last_t: Option<f64>,
}

impl GnssNoise {
    pub fn new(cfg: GnssConfig, rng: ChaCha8Rng) -> Self {
        Self { cfg, rng, state: [0.0; 4], last_t: None }
    }

    pub fn config(&self) -> &GnssConfig {
        &self.cfg
    }

    fn advance(&mut self, t: f64) {
        let keep = match self.last_t {
            Some(prev) if self.cfg.tau_s > 0.0 => (-(t - prev).max(0.0) / self.cfg.tau_s).exp(),
            _ => 0.0,
        };
        let fresh = (1.0 - keep * keep).sqrt();
        for s in &mut self.state {
            let w: f64 = self.rng.sample(StandardNormal);
            *s = keep * *s + fresh * w;
        }
        self.last_t = Some(t);
    }

    /// Noisy reading of `truth` at sim time `t`.
    pub fn sample(&mut self, t: f64, truth: &Pose) -> Pose {
        self.advance(t);
        let [e, n, u, y] = self.state;
        let c = &self.cfg;
        Pose::new(
            truth.position + EnuPoint::new(c.sigma_h * e, c.sigma_h * n, c.sigma_v * u),
            truth.yaw + c.sigma_yaw_deg * y,
            truth.pitch,
        )
    }
}
