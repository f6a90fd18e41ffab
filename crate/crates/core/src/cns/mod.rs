//! GAN-based channel noise simulator.
//!
//! A generator maps Gaussian latents to normalized noise sequences; a critic
//! scores sequences under the Wasserstein objective with a gradient penalty.
//! Two extra generator-side regularizers shape the fit: a boundary-rewarding
//! term that pushes probability mass toward the clip edges (where the
//! impulsive outliers live after normalization), and an energy term matching
//! generated and real sequence norms.

mod config;
mod io;
mod losses;
mod model;
mod norm;
mod train;

pub use config::GanConfig;
pub use io::{load_cns, save_cns};
pub use losses::{build_loss_d, build_loss_g, u_reg, u_reg_node, v_reg};
pub use model::{build_generator, critic_specs, generator_specs, CnsModel, EpochStats};
pub use norm::NormState;
pub use train::{sample_cns, train_cns};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnsError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step}: {what} became non-finite")]
    Diverged { step: usize, what: &'static str },
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error(transparent)]
    Noise(#[from] crate::noise::NoiseError),
}
