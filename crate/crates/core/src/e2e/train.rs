//! Joint training of transmitter, preprocessor and detector through an
//! additive noise source.

use rand::Rng;

use crate::classical::FadingRealization;
use crate::cns::{sample_cns, CnsModel};
use crate::noise::{fill_mgin, stream, MginParams};
use crate::tensor::{AdamState, Mode, Tape, Tensor};

use super::config::LossKind;
use super::losses::{build_loss_bce, build_loss_mse};
use super::model::TransceiverModel;
use super::E2eError;

const ADAM_BETAS: (f32, f32) = (0.9, 0.999);

/// Where channel noise comes from during training. Evaluation always uses
/// the analytic sampler; the learned simulator substitutes the channel only
/// inside the training loop.
pub enum ChannelSource<'a> {
    Analytic(MginParams),
    Cns(&'a CnsModel),
}

impl ChannelSource<'_> {
    /// The noise law this source realizes.
    pub fn params(&self) -> MginParams {
        match self {
            ChannelSource::Analytic(p) => *p,
            ChannelSource::Cns(m) => m.noise_params,
        }
    }

    fn fill(&self, out: &mut [f32], cols: usize, rng: &mut rand_chacha::ChaCha8Rng) {
        match self {
            ChannelSource::Analytic(p) => {
                let mut buf = vec![0.0f64; out.len()];
                fill_mgin(p, &mut buf, rng);
                for (o, v) in out.iter_mut().zip(&buf) {
                    *o = *v as f32;
                }
            }
            ChannelSource::Cns(model) => {
                assert_eq!(
                    cols, model.config.seq_len,
                    "simulator sequence length does not match the transceiver"
                );
                let rows = out.len() / cols;
                let batch = sample_cns(model, rows, rng.gen());
                for (o, v) in out.iter_mut().zip(batch.data()) {
                    *o = *v as f32;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub epoch: usize,
    pub loss: f64,
}

/// Train the transceiver in place. Seed substreams: 1 for information bits,
/// 2 for channel noise, 3 for fading. Fixed seed gives identical final
/// parameters.
pub fn train_e2e(
    model: &mut TransceiverModel,
    channel: &ChannelSource<'_>,
    epochs: usize,
    seed: u64,
) -> Result<Vec<TrainStats>, E2eError> {
    model.cfg.validate()?;
    let cfg = model.cfg;
    let (b, l, n) = (cfg.batch, cfg.bits_per_block, cfg.seq_len());
    let mut bits_rng = stream(seed, 1);
    let mut noise_rng = stream(seed, 2);
    let mut fade_rng = stream(seed, 3);

    let mut adam_tx = AdamState::for_params(cfg.lr, ADAM_BETAS.0, ADAM_BETAS.1, &model.transmitter.params());
    let mut adam_pre = AdamState::for_params(cfg.lr, ADAM_BETAS.0, ADAM_BETAS.1, &model.preprocessor.params());
    let mut adam_det = AdamState::for_params(cfg.lr, ADAM_BETAS.0, ADAM_BETAS.1, &model.detector.params());

    let mut history = Vec::with_capacity(epochs);
    let mut step = 0usize;
    for epoch in 0..epochs {
        let mut epoch_loss = 0.0f64;
        for _ in 0..cfg.steps_per_epoch {
            let bits = Tensor::new(
                vec![b, 1, l],
                (0..b * l).map(|_| bits_rng.gen_range(0..2) as f32).collect(),
            )?;

            let mut tape = Tape::new();
            let tx_b = model.transmitter.bind(&mut tape);
            let pre_b = model.preprocessor.bind(&mut tape);
            let det_b = model.detector.bind(&mut tape);

            let bits_node = tape.constant(bits.clone());
            let x = model.transmitter.apply(&mut tape, &tx_b, bits_node, Mode::Train)?;
            // batch power normalization to unit mean square
            let sq = tape.square(x);
            let ms = tape.mean_all(sq);
            let root = tape.sqrt(ms);
            let inv = tape.recip(root);
            let xn = tape.mul_scalar(x, inv);
            let mut flat = tape.reshape(xn, vec![b, n]);

            if let Some(block_len) = cfg.fading_block_len {
                let mut gains = vec![0.0f32; b * n];
                for row in gains.chunks_mut(n) {
                    let real = FadingRealization::draw(n, block_len, &mut fade_rng);
                    for (i, g) in row.iter_mut().enumerate() {
                        *g = real.gains()[i / block_len] as f32;
                    }
                }
                let gain_node = tape.constant(Tensor::new(vec![b, n], gains)?);
                flat = tape.mul(flat, gain_node);
            }

            let mut noise = vec![0.0f32; b * n];
            channel.fill(&mut noise, n, &mut noise_rng);
            let noise_node = tape.constant(Tensor::new(vec![b, n], noise)?);
            let y = tape.add(flat, noise_node);
            let y3 = tape.reshape(y, vec![b, 2, l]);

            let r = model.preprocessor.apply(&mut tape, &pre_b, y3, Mode::Train)?;
            let soft = model.detector.apply(&mut tape, &det_b, r, Mode::Train)?;
            let loss = match cfg.loss_kind {
                LossKind::Bce => build_loss_bce(&mut tape, soft, &bits),
                LossKind::Mse => build_loss_mse(&mut tape, soft, &bits),
            };
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(E2eError::Diverged { step });
            }
            epoch_loss += lv as f64;

            let grads = tape.backward(loss)?;
            let collect = |ids: &[usize]| -> Vec<Option<Tensor>> {
                ids.iter().map(|&id| grads.get(id).cloned()).collect()
            };
            let gx = collect(&tx_b.param_ids);
            let gp = collect(&model.preprocessor.param_ids(&pre_b));
            let gd = collect(&det_b.param_ids);

            let turn = step % 3;
            if cfg.joint_update || turn == 0 {
                adam_tx.step(&mut model.transmitter.params_mut(), &gx);
            }
            if cfg.joint_update || turn == 1 {
                adam_pre.step(&mut model.preprocessor.params_mut(), &gp);
            }
            if cfg.joint_update || turn == 2 {
                adam_det.step(&mut model.detector.params_mut(), &gd);
            }
            step += 1;
        }
        history.push(TrainStats {
            epoch,
            loss: epoch_loss / cfg.steps_per_epoch as f64,
        });
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::e2e::config::{MwcnnConfig, TransceiverConfig};
    use crate::noise::params_from_ebn0;

    fn tiny_cfg() -> (TransceiverConfig, MwcnnConfig) {
        (
            TransceiverConfig {
                bits_per_block: 16,
                batch: 8,
                steps_per_epoch: 2,
                ..TransceiverConfig::default()
            },
            MwcnnConfig {
                width_l1: 8,
                width_l2: 16,
                ..MwcnnConfig::default()
            },
        )
    }

    #[test]
    fn fixed_seed_gives_identical_parameters() {
        let (cfg, mw) = tiny_cfg();
        let params = params_from_ebn0(10.0, 2.0, 2, 1.0, 1.5, 1.0).unwrap();
        let run = |seed| {
            let mut m = TransceiverModel::new(&cfg, &mw, seed).unwrap();
            let h = train_e2e(&mut m, &ChannelSource::Analytic(params), 2, seed).unwrap();
            (m, h)
        };
        let (m1, h1) = run(5);
        let (m2, h2) = run(5);
        assert_eq!(h1, h2);
        for (a, b) in m1.detector.params().iter().zip(m2.detector.params().iter()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn training_reduces_the_loss_at_high_snr() {
        let (mut cfg, mw) = tiny_cfg();
        cfg.steps_per_epoch = 12;
        let params = params_from_ebn0(16.0, 2.0, 2, 1.0, 1.5, 1.0).unwrap();
        let mut m = TransceiverModel::new(&cfg, &mw, 11).unwrap();
        let h = train_e2e(&mut m, &ChannelSource::Analytic(params), 5, 11).unwrap();
        assert!(
            h.last().unwrap().loss < h.first().unwrap().loss,
            "loss went {} -> {}",
            h.first().unwrap().loss,
            h.last().unwrap().loss
        );
    }
}
