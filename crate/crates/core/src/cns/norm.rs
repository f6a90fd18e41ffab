use serde::{Deserialize, Serialize};

use crate::noise::NoiseError;

/// Scale fitted on training noise so samples map into [-1, 1].
///
/// The stable component is unbounded, so the scale is a high quantile of the
/// absolute training samples rather than a maximum; everything beyond it is
/// clipped during normalization. Denormalization multiplies back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormState {
    pub scale: f64,
    pub clip_quantile: f64,
}

impl NormState {
    pub fn fit(samples: &[f64], clip_quantile: f64) -> Result<Self, NoiseError> {
        if samples.is_empty() {
            return Err(NoiseError::EmptyInput("NormState::fit"));
        }
        if !(clip_quantile > 0.0 && clip_quantile <= 1.0) {
            return Err(NoiseError::Fit(format!(
                "clip quantile must be in (0, 1], got {clip_quantile}"
            )));
        }
        let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
        abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((clip_quantile * (abs.len() - 1) as f64).floor() as usize).min(abs.len() - 1);
        let scale = abs[idx];
        if !(scale > 0.0) {
            return Err(NoiseError::Fit(format!(
                "fitted scale is {scale}; data has no spread"
            )));
        }
        Ok(NormState {
            scale,
            clip_quantile,
        })
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f32> {
        x.iter()
            .map(|&v| ((v / self.scale).clamp(-1.0, 1.0)) as f32)
            .collect()
    }

    pub fn denormalize(&self, g: &[f32]) -> Vec<f64> {
        g.iter().map(|&v| v as f64 * self.scale).collect()
    }
}
