//! Conventional MSK transceiver baselines: modulation, Viterbi sequence
//! detection with pluggable branch metrics, myriad-filter preprocessing,
//! Rayleigh fading with zero-forcing equalization, and the Gaussian-channel
//! theoretical reference.

mod fading;
mod metric;
mod msk;
mod myriad;
mod theory;
mod trellis;
mod viterbi;

pub use fading::FadingRealization;
pub use metric::{branch_cost_aml, branch_cost_gaussian, branch_cost_myriad, BranchMetric};
pub use msk::{msk_modulate, MskConfig};
pub use myriad::{myriad_filter, myriad_k, sample_myriad};
pub use theory::{q_function, q_inverse, theoretical_msk_ber};
pub use trellis::Trellis;
pub use viterbi::viterbi_detect;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("framing error: {0}")]
    Framing(String),
}
