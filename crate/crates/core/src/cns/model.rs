use rand::Rng;

use crate::noise::MginParams;
use crate::tensor::{Act, LayerSpec, Network};

use super::config::GanConfig;
use super::norm::NormState;

/// Scale applied to the generator's output layer at initialization: the
/// untrained generator then emits values concentrated near zero, where the
/// bulk of the normalized noise lives, instead of spreading over the whole
/// clip range.
const OUTPUT_INIT_SCALE: f32 = 0.1;

/// Generator: five linear stages with batchnorm and slope-0.2 leaky ReLUs,
/// Tanh head keeping the output in (-1, 1).
pub fn generator_specs(z_dim: usize, seq_len: usize) -> Vec<LayerSpec> {
    let lrelu = LayerSpec::Activation(Act::LeakyRelu(0.2));
    vec![
        LayerSpec::Linear { inputs: z_dim, outputs: 128 },
        LayerSpec::BatchNorm1d { features: 128 },
        lrelu.clone(),
        LayerSpec::Linear { inputs: 128, outputs: 256 },
        LayerSpec::BatchNorm1d { features: 256 },
        lrelu.clone(),
        LayerSpec::Linear { inputs: 256, outputs: 512 },
        LayerSpec::BatchNorm1d { features: 512 },
        lrelu.clone(),
        LayerSpec::Linear { inputs: 512, outputs: 256 },
        LayerSpec::BatchNorm1d { features: 256 },
        lrelu,
        LayerSpec::Linear { inputs: 256, outputs: seq_len },
        LayerSpec::Activation(Act::Tanh),
    ]
}

/// Build the generator network with the output-layer init scaled down.
pub fn build_generator(z_dim: usize, seq_len: usize, rng: &mut impl Rng) -> Network {
    let mut g = Network::from_specs(&generator_specs(z_dim, seq_len), rng);
    let n = g.layers.len();
    if let crate::tensor::Layer::Linear { w, b } = &mut g.layers[n - 2] {
        for v in w.data_mut().iter_mut().chain(b.data_mut()) {
            *v *= OUTPUT_INIT_SCALE;
        }
    }
    g
}

/// Critic: linear / leaky-ReLU only (no batchnorm), scalar output. This is
/// exactly the family the closed-form gradient-penalty path supports.
pub fn critic_specs(seq_len: usize) -> Vec<LayerSpec> {
    let lrelu = LayerSpec::Activation(Act::LeakyRelu(0.2));
    vec![
        LayerSpec::Linear { inputs: seq_len, outputs: 128 },
        lrelu.clone(),
        LayerSpec::Linear { inputs: 128, outputs: 64 },
        lrelu,
        LayerSpec::Linear { inputs: 64, outputs: 1 },
    ]
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    /// Empirical W1 between denormalized generator draws and fresh noise.
    pub w1: f64,
}

/// Trained channel noise simulator.
#[derive(Debug, Clone)]
pub struct CnsModel {
    pub generator: Network,
    pub critic: Network,
    pub norm: NormState,
    pub config: GanConfig,
    /// The noise law this simulator was fitted to.
    pub noise_params: MginParams,
    pub seed: u64,
    pub history: Vec<EpochStats>,
}

impl CnsModel {
    /// Eval-mode generator forward on a latent batch; output in (-1, 1).
    pub fn generate_normalized(&self, z: &crate::tensor::Tensor) -> crate::tensor::Tensor {
        self.generator
            .forward_eval(z)
            .expect("generator shapes are fixed by construction")
    }

    /// Draw a latent batch for this model's generator.
    pub fn draw_latents(&self, rows: usize, rng: &mut impl Rng) -> crate::tensor::Tensor {
        let n = rows * self.config.z_dim;
        let data: Vec<f32> = (0..n)
            .map(|_| {
                let v: f64 = rng.sample(rand_distr::StandardNormal);
                v as f32
            })
            .collect();
        crate::tensor::Tensor::new(vec![rows, self.config.z_dim], data).unwrap()
    }
}
