//! Mixed Gaussian-impulsive noise: parameterization, sampling, the numerical
//! density oracle and distribution-fit statistics.

mod density;
mod params;
mod sampler;
mod stats;

pub use density::{DensityGrid, GridSpec};
pub use params::{ebn0_from_gsnr, params_from_ebn0, MginParams, NoiseError, StableParams};
pub use sampler::{fill_mgin, sample_mgin, sample_sas, stream, NoiseBatch};
pub use stats::{empirical_w1, ks_critical_value, two_sample_ks};
