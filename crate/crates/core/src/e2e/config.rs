use serde::{Deserialize, Serialize};

use super::E2eError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Mse,
}

/// End-to-end system configuration. One block carries `bits_per_block`
/// information bits over `2 * bits_per_block` real channel samples (the
/// two-channel transmitter head flattened channel-major), so the code-rate
/// bookkeeping uses `T_b/T_s = 2` throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransceiverConfig {
    pub bits_per_block: usize,
    pub loss_kind: LossKind,
    pub lr: f32,
    pub batch: usize,
    /// Operating point the system trains at.
    pub train_ebn0_db: f64,
    /// Train with block fading applied to the transmitted sequence (the
    /// learned receiver gets no CSI and no equalizer).
    pub fading_block_len: Option<usize>,
    /// Joint update of all three components per step; when false the
    /// transmitter, preprocessor and detector take turns.
    pub joint_update: bool,
    pub steps_per_epoch: usize,
}

impl Default for TransceiverConfig {
    fn default() -> Self {
        TransceiverConfig {
            bits_per_block: 128,
            loss_kind: LossKind::Bce,
            lr: 5e-4,
            batch: 128,
            train_ebn0_db: 10.0,
            fading_block_len: None,
            joint_update: true,
            steps_per_epoch: 25,
        }
    }
}

impl TransceiverConfig {
    /// Channel samples per block, `N = 2L`.
    pub fn seq_len(&self) -> usize {
        2 * self.bits_per_block
    }

    /// Samples per information bit.
    pub fn tb_over_ts(&self) -> f64 {
        2.0
    }

    pub fn validate(&self) -> Result<(), E2eError> {
        if self.bits_per_block < 4 {
            return Err(E2eError::InvalidConfig(format!(
                "bits_per_block must be at least 4, got {}",
                self.bits_per_block
            )));
        }
        if self.batch == 0 || self.steps_per_epoch == 0 {
            return Err(E2eError::InvalidConfig("batch and steps_per_epoch must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(E2eError::InvalidConfig(format!("learning rate {}", self.lr)));
        }
        if let Some(bl) = self.fading_block_len {
            if bl == 0 || self.seq_len() % bl != 0 {
                return Err(E2eError::InvalidConfig(format!(
                    "fading block length {bl} must divide the sequence length {}",
                    self.seq_len()
                )));
            }
        }
        Ok(())
    }
}

/// Preprocessor shape: per level a DWT, a block of `convs_per_block`
/// conv+batchnorm+relu stages at the level's width, mirrored on the way up
/// with additive same-level skips, and a zero-initialized linear head whose
/// prediction is subtracted from the input when `residual` is on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwcnnConfig {
    pub levels: usize,
    pub width_l1: usize,
    pub width_l2: usize,
    pub kernel: usize,
    pub convs_per_block: usize,
    pub residual: bool,
}

impl Default for MwcnnConfig {
    fn default() -> Self {
        MwcnnConfig {
            levels: 2,
            width_l1: 64,
            width_l2: 128,
            kernel: 3,
            convs_per_block: 3,
            residual: true,
        }
    }
}

impl MwcnnConfig {
    pub fn validate(&self) -> Result<(), E2eError> {
        if self.levels != 2 {
            return Err(E2eError::InvalidConfig(
                "this preprocessor is built for exactly 2 wavelet levels".into(),
            ));
        }
        if self.kernel % 2 == 0 {
            return Err(E2eError::InvalidConfig("kernel must be odd".into()));
        }
        if self.convs_per_block < 2 {
            return Err(E2eError::InvalidConfig("need at least 2 convs per block".into()));
        }
        Ok(())
    }
}
