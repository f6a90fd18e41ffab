//! Transceiver networks and the sequence wavelet-CNN preprocessor.

use rand::Rng;

use crate::tensor::{self, Act, Binding, Layer, LayerSpec, Mode, Network, NodeId, Tape, Tensor};

use super::config::{MwcnnConfig, TransceiverConfig};
use super::E2eError;

/// Transmitter: four conv stages, Tanh head with two output channels.
pub fn transmitter_specs() -> Vec<LayerSpec> {
    let relu = LayerSpec::Activation(Act::Relu);
    vec![
        LayerSpec::Conv1d { in_ch: 1, out_ch: 128, kernel: 5 },
        LayerSpec::BatchNorm1d { features: 128 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 128, out_ch: 256, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 256 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 256, out_ch: 64, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 64 },
        relu,
        LayerSpec::Conv1d { in_ch: 64, out_ch: 2, kernel: 3 },
        LayerSpec::Activation(Act::Tanh),
    ]
}

/// Detector: six conv stages, Sigmoid head with one output channel.
pub fn detector_specs() -> Vec<LayerSpec> {
    let relu = LayerSpec::Activation(Act::Relu);
    vec![
        LayerSpec::Conv1d { in_ch: 2, out_ch: 64, kernel: 5 },
        LayerSpec::BatchNorm1d { features: 64 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 64, out_ch: 128, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 128 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 128, out_ch: 256, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 256 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 256, out_ch: 128, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 128 },
        relu.clone(),
        LayerSpec::Conv1d { in_ch: 128, out_ch: 64, kernel: 3 },
        LayerSpec::BatchNorm1d { features: 64 },
        relu,
        LayerSpec::Conv1d { in_ch: 64, out_ch: 1, kernel: 3 },
        LayerSpec::Activation(Act::Sigmoid),
    ]
}

fn conv_block(in_ch: usize, out_ch: usize, count: usize, kernel: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for i in 0..count {
        let ic = if i == 0 { in_ch } else { out_ch };
        specs.push(LayerSpec::Conv1d { in_ch: ic, out_ch, kernel });
        specs.push(LayerSpec::BatchNorm1d { features: out_ch });
        specs.push(LayerSpec::Activation(Act::Relu));
    }
    specs
}

/// Two-level wavelet-CNN denoiser for `[batch, 2, len]` sequences.
#[derive(Debug, Clone)]
pub struct Mwcnn {
    pub cfg: MwcnnConfig,
    down1: Network,
    down2: Network,
    up2: Network,
    up1: Network,
}

pub struct MwcnnBinding {
    down1: Binding,
    down2: Binding,
    up2: Binding,
    up1: Binding,
}

impl Mwcnn {
    pub fn new(cfg: &MwcnnConfig, rng: &mut impl Rng) -> Result<Self, E2eError> {
        cfg.validate()?;
        let (w1, w2, k, n) = (cfg.width_l1, cfg.width_l2, cfg.kernel, cfg.convs_per_block);
        let down1 = Network::from_specs(&conv_block(4, w1, n, k), rng);
        let down2 = Network::from_specs(&conv_block(2 * w1, w2, n, k), rng);
        // bottom-up block ends at 2*w1 channels so the inverse transform
        // lands back on w1
        let mut up2_specs = conv_block(w2, w2, n - 1, k);
        up2_specs.extend(conv_block(w2, 2 * w1, 1, k));
        let up2 = Network::from_specs(&up2_specs, rng);
        // final stage is a linear conv to 4 channels, zero-initialized so the
        // residual head starts as the identity
        let mut up1_specs = conv_block(w1, w1, n - 1, k);
        up1_specs.push(LayerSpec::Conv1d { in_ch: w1, out_ch: 4, kernel: k });
        let mut up1 = Network::from_specs(&up1_specs, rng);
        if let Some(Layer::Conv1d { w, b, .. }) = up1.layers.last_mut() {
            *w = Tensor::zeros(w.shape().to_vec());
            *b = Tensor::zeros(b.shape().to_vec());
        }
        Ok(Mwcnn { cfg: *cfg, down1, down2, up2, up1 })
    }

    fn check_input(&self, shape: &[usize]) -> Result<(), E2eError> {
        let div = 1 << self.cfg.levels;
        if shape.len() != 3 || shape[1] != 2 || shape[2] % div != 0 || shape[2] == 0 {
            return Err(E2eError::Framing(format!(
                "preprocessor input must be [batch, 2, len] with len divisible by {div}, got {shape:?}"
            )));
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape) -> MwcnnBinding {
        MwcnnBinding {
            down1: self.down1.bind(tape),
            down2: self.down2.bind(tape),
            up2: self.up2.bind(tape),
            up1: self.up1.bind(tape),
        }
    }

    pub fn apply(
        &mut self,
        tape: &mut Tape,
        binding: &MwcnnBinding,
        x: NodeId,
        mode: Mode,
    ) -> Result<NodeId, E2eError> {
        self.check_input(tape.value(x).shape())?;
        let d1 = tape.dwt1(x);
        let c1 = self.down1.apply(tape, &binding.down1, d1, mode)?;
        let d2 = tape.dwt1(c1);
        let c2 = self.down2.apply(tape, &binding.down2, d2, mode)?;
        let u2 = self.up2.apply(tape, &binding.up2, c2, mode)?;
        let i2 = tape.iwt1(u2);
        let s1 = tape.add(i2, c1);
        let u1 = self.up1.apply(tape, &binding.up1, s1, mode)?;
        let i1 = tape.iwt1(u1);
        Ok(if self.cfg.residual { tape.sub(x, i1) } else { i1 })
    }

    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor, E2eError> {
        self.check_input(x.shape())?;
        let d1 = tensor::dwt1(x)?;
        let c1 = self.down1.forward_eval(&d1)?;
        let d2 = tensor::dwt1(&c1)?;
        let c2 = self.down2.forward_eval(&d2)?;
        let u2 = self.up2.forward_eval(&c2)?;
        let i2 = tensor::iwt1(&u2)?;
        let mut s1 = i2;
        for (a, b) in s1.data_mut().iter_mut().zip(c1.data()) {
            *a += b;
        }
        let u1 = self.up1.forward_eval(&s1)?;
        let i1 = tensor::iwt1(&u1)?;
        if self.cfg.residual {
            let mut out = x.clone();
            for (a, b) in out.data_mut().iter_mut().zip(i1.data()) {
                *a -= b;
            }
            Ok(out)
        } else {
            Ok(i1)
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.down1.params();
        p.extend(self.down2.params());
        p.extend(self.up2.params());
        p.extend(self.up1.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.down1.params_mut();
        p.extend(self.down2.params_mut());
        p.extend(self.up2.params_mut());
        p.extend(self.up1.params_mut());
        p
    }

    pub fn param_ids<'a>(&self, binding: &'a MwcnnBinding) -> Vec<NodeId> {
        let mut ids = binding.down1.param_ids.clone();
        ids.extend(&binding.down2.param_ids);
        ids.extend(&binding.up2.param_ids);
        ids.extend(&binding.up1.param_ids);
        ids
    }

    pub fn state_entries(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut e = self.down1.state_entries(&format!("{prefix}down1."));
        e.extend(self.down2.state_entries(&format!("{prefix}down2.")));
        e.extend(self.up2.state_entries(&format!("{prefix}up2.")));
        e.extend(self.up1.state_entries(&format!("{prefix}up1.")));
        e
    }

    pub fn load_state(
        &mut self,
        prefix: &str,
        entries: &[(String, Tensor)],
    ) -> Result<(), crate::tensor::TensorError> {
        self.down1.load_state(&format!("{prefix}down1."), entries)?;
        self.down2.load_state(&format!("{prefix}down2."), entries)?;
        self.up2.load_state(&format!("{prefix}up2."), entries)?;
        self.up1.load_state(&format!("{prefix}up1."), entries)
    }
}

/// The three-component learned transceiver.
#[derive(Debug, Clone)]
pub struct TransceiverModel {
    pub transmitter: Network,
    pub preprocessor: Mwcnn,
    pub detector: Network,
    pub cfg: TransceiverConfig,
    pub seed: u64,
}

impl TransceiverModel {
    pub fn new(cfg: &TransceiverConfig, mw: &MwcnnConfig, seed: u64) -> Result<Self, E2eError> {
        cfg.validate()?;
        let mut rng = crate::noise::stream(seed, 0);
        Ok(TransceiverModel {
            transmitter: Network::from_specs(&transmitter_specs(), &mut rng),
            preprocessor: Mwcnn::new(mw, &mut rng)?,
            detector: Network::from_specs(&detector_specs(), &mut rng),
            cfg: *cfg,
            seed,
        })
    }

    /// Eval-mode transmit: map a `[batch, 1, L]` bit tensor to `[batch, 2, L]`
    /// channel samples, batch-power-normalized to unit mean square.
    pub fn transmit_eval(&self, bits: &Tensor) -> Result<Tensor, E2eError> {
        let mut x = self.transmitter.forward_eval(bits)?;
        let ms: f64 =
            x.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64;
        let gain = 1.0 / ms.sqrt().max(1e-20) as f32;
        for v in x.data_mut() {
            *v *= gain;
        }
        Ok(x)
    }

    /// Eval-mode preprocess of `[batch, 2, L]` received samples.
    pub fn preprocess_eval(&self, y: &Tensor) -> Result<Tensor, E2eError> {
        self.preprocessor.forward_eval(y)
    }

    /// Eval-mode detect: per-bit probabilities and hard bits (ties at
    /// exactly 0.5 resolve to 0).
    pub fn detect_eval(&self, r: &Tensor) -> Result<(Tensor, Vec<u8>), E2eError> {
        let soft = self.detector.forward_eval(r)?;
        let bits = soft.data().iter().map(|&p| u8::from(p > 0.5)).collect();
        Ok((soft, bits))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn residual_head_is_identity_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mw = Mwcnn::new(&MwcnnConfig::default(), &mut rng).unwrap();
        let x = Tensor::new(
            vec![2, 2, 64],
            (0..256).map(|i| ((i as f32) * 0.17).sin()).collect(),
        )
        .unwrap();
        let y = mw.forward_eval(&x).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn preprocessor_preserves_shape_across_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mw = Mwcnn::new(&MwcnnConfig::default(), &mut rng).unwrap();
        for len in [64usize, 128, 256] {
            let x = Tensor::zeros(vec![1, 2, len]);
            let y = mw.forward_eval(&x).unwrap();
            assert_eq!(y.shape(), &[1, 2, len]);
        }
    }

    #[test]
    fn preprocessor_rejects_bad_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mw = Mwcnn::new(&MwcnnConfig::default(), &mut rng).unwrap();
        assert!(matches!(
            mw.forward_eval(&Tensor::zeros(vec![1, 2, 66])),
            Err(E2eError::Framing(_))
        ));
        assert!(mw.forward_eval(&Tensor::zeros(vec![1, 3, 64])).is_err());
    }

    #[test]
    fn transmit_is_bounded_and_unit_power() {
        let model = TransceiverModel::new(
            &TransceiverConfig::default(),
            &MwcnnConfig::default(),
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let bits = Tensor::new(
            vec![8, 1, 128],
            (0..8 * 128).map(|_| rng.gen_range(0..2) as f32).collect(),
        )
        .unwrap();
        let raw = model.transmitter.forward_eval(&bits).unwrap();
        assert!(raw.data().iter().all(|v| v.abs() < 1.0 + 1e-6), "tanh head bound");
        let x = model.transmit_eval(&bits).unwrap();
        let p: f64 = x.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64;
        assert!((p - 1.0).abs() < 1e-3, "power {p}");
    }

    #[test]
    fn detect_outputs_probabilities_and_deterministic_bits() {
        let model = TransceiverModel::new(
            &TransceiverConfig::default(),
            &MwcnnConfig::default(),
            5,
        )
        .unwrap();
        let r = Tensor::zeros(vec![2, 2, 128]);
        let (soft, bits) = model.detect_eval(&r).unwrap();
        assert!(soft.data().iter().all(|&p| p > 0.0 && p < 1.0));
        let (_, bits2) = model.detect_eval(&r).unwrap();
        assert_eq!(bits, bits2);
        assert_eq!(bits.len(), 2 * 128);
    }
}
