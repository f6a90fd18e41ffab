//! Physical-layer simulation of communication over mixed Gaussian-impulsive
//! noise (MGIN) channels.
//!
//! The crate is organized around six subsystems:
//!
//! - [`noise`]: alpha-stable and MGIN sampling, GSNR bookkeeping, a numerical
//!   density oracle obtained by characteristic-function inversion, and the
//!   empirical Wasserstein-1 fit metric.
//! - [`classical`]: MSK modulation, Viterbi sequence detection with pluggable
//!   branch metrics (Gaussian / Myriad / approximate-ML), myriad filtering,
//!   and Rayleigh fading with zero-forcing equalization.
//! - [`tensor`]: a small dense-tensor engine with reverse-mode automatic
//!   differentiation, the layers used by the networks in this crate, Adam,
//!   Haar DWT/IWT and a binary checkpoint format.
//! - [`cns`]: the GAN-based channel noise simulator (WGAN-GP critic loss plus
//!   boundary/energy regularizers on the generator).
//! - [`e2e`]: the learned transceiver (transmitter, wavelet-CNN preprocessor,
//!   detector), its training loop and Monte-Carlo BER evaluation.
//! - [`harness`]: experiment configuration, seeding, CSV/manifest emission and
//!   the pipelines behind the command-line interface.

pub mod classical;
pub mod cns;
pub mod e2e;
pub mod harness;
pub mod noise;
pub mod tensor;

pub use noise::{DensityGrid, GridSpec, MginParams, NoiseBatch, StableParams};
pub use tensor::{Tape, Tensor, TensorError};
