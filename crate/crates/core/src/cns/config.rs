use serde::{Deserialize, Serialize};

use super::CnsError;

/// Hyperparameters of the noise-simulator GAN.
///
/// Architecture dimensions follow the adopted generator/critic tables; the
/// optimization knobs default to the usual gradient-penalty settings since
/// they are not pinned elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub z_dim: usize,
    pub seq_len: usize,
    /// Gradient-penalty weight.
    pub lambda_gp: f32,
    /// Boundary-reward weight.
    pub alpha1: f32,
    /// Energy-matching weight.
    pub alpha2: f32,
    /// Boundary margin: the reward function's pole sits at `1 + epsilon`.
    pub epsilon: f32,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub batch: usize,
    pub lr: f32,
    /// Fraction of training mass kept unclipped by the normalizer.
    pub clip_quantile: f64,
    /// Generator updates per recorded epoch.
    pub steps_per_epoch: usize,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            z_dim: 100,
            seq_len: 256,
            lambda_gp: 10.0,
            alpha1: 0.1,
            alpha2: 1.0,
            epsilon: 0.05,
            n_critic: 5,
            batch: 128,
            lr: 5e-5,
            clip_quantile: 0.999,
            steps_per_epoch: 25,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), CnsError> {
        let fail = |msg: String| Err(CnsError::InvalidConfig(msg));
        if self.z_dim == 0 || self.seq_len < 2 {
            return fail(format!("z_dim {} / seq_len {}", self.z_dim, self.seq_len));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("epsilon must be in (0, 1), got {}", self.epsilon));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return fail(format!(
                "regularizer weights must be nonnegative, got {} and {}",
                self.alpha1, self.alpha2
            ));
        }
        if self.n_critic == 0 {
            return fail("n_critic must be at least 1".into());
        }
        if self.batch < 2 {
            return fail(format!("batch must be at least 2, got {}", self.batch));
        }
        if !(self.lr > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.clip_quantile > 0.0 && self.clip_quantile <= 1.0) {
            return fail(format!("clip_quantile must be in (0, 1], got {}", self.clip_quantile));
        }
        if self.steps_per_epoch == 0 {
            return fail("steps_per_epoch must be at least 1".into());
        }
        Ok(())
    }
}
