//! Learned transceiver: convolutional transmitter and detector around a
//! sequence wavelet-CNN preprocessor, end-to-end training against an analytic
//! or learned noise source, and the Monte-Carlo BER evaluation engine shared
//! with the classical baselines.

mod config;
mod eval;
mod io;
mod losses;
mod model;
mod train;

pub use config::{LossKind, MwcnnConfig, TransceiverConfig};
pub use eval::{ber_eval, BerPoint, EvalOptions, FadingKind, System};
pub use io::{load_transceiver, save_transceiver};
pub use losses::{build_loss_bce, build_loss_mse, loss_bce, loss_mse};
pub use model::{detector_specs, transmitter_specs, Mwcnn, TransceiverModel};
pub use train::{train_e2e, ChannelSource, TrainStats};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum E2eError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("training diverged at step {step}: loss became non-finite")]
    Diverged { step: usize },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Noise(#[from] crate::noise::NoiseError),
    #[error(transparent)]
    Classical(#[from] crate::classical::ClassicalError),
}
