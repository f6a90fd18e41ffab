//! Alternating WGAN-GP optimization of the noise simulator.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::noise::{empirical_w1, fill_mgin, stream, MginParams, NoiseBatch};
use crate::tensor::{AdamState, Network, Tape, Tensor};

use super::config::GanConfig;
use super::losses::{build_loss_d, build_loss_g};
use super::model::{build_generator, critic_specs, CnsModel, EpochStats};
use super::norm::NormState;
use super::CnsError;

/// Adam moments for the gradient-penalty objective.
const ADAM_BETAS: (f32, f32) = (0.5, 0.9);
/// Samples used to fit the normalizer before training starts.
const NORM_FIT_SAMPLES: usize = 1 << 17;
/// Elements per side for the per-epoch W1 probe.
const W1_PROBE: usize = 1 << 14;

fn normal_tensor(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let data: Vec<f32> = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v as f32
        })
        .collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

fn noise_batch_normalized(
    params: &MginParams,
    norm: &NormState,
    rows: usize,
    cols: usize,
    rng: &mut impl Rng,
) -> Tensor {
    let mut raw = vec![0.0f64; rows * cols];
    fill_mgin(params, &mut raw, rng);
    Tensor::new(vec![rows, cols], norm.normalize(&raw)).unwrap()
}

/// Train a channel noise simulator for one noise law.
///
/// Seed layout: substream 0 initializes networks, 1 draws training noise,
/// 2 draws latents, 3 draws interpolation coefficients, 4 drives the
/// per-epoch W1 probe. Fixed seed, fixed config: bitwise-identical history.
pub fn train_cns(
    cfg: &GanConfig,
    params: &MginParams,
    epochs: usize,
    seed: u64,
) -> Result<CnsModel, CnsError> {
    cfg.validate()?;
    let mut init_rng = stream(seed, 0);
    let mut data_rng = stream(seed, 1);
    let mut z_rng = stream(seed, 2);
    let mut u_rng = stream(seed, 3);
    let mut probe_rng = stream(seed, 4);

    let mut calib = vec![0.0f64; NORM_FIT_SAMPLES];
    fill_mgin(params, &mut calib, &mut data_rng);
    let norm = NormState::fit(&calib, cfg.clip_quantile)?;

    let mut generator = build_generator(cfg.z_dim, cfg.seq_len, &mut init_rng);
    let mut critic = Network::from_specs(&critic_specs(cfg.seq_len), &mut init_rng);
    let mut adam_g = AdamState::for_params(cfg.lr, ADAM_BETAS.0, ADAM_BETAS.1, &generator.params());
    let mut adam_d = AdamState::for_params(cfg.lr, ADAM_BETAS.0, ADAM_BETAS.1, &critic.params());

    let b = cfg.batch;
    let n = cfg.seq_len;
    let mut history = Vec::with_capacity(epochs);
    let mut step = 0usize;

    for epoch in 0..epochs {
        let mut epoch_ld = 0.0f64;
        let mut epoch_lg = 0.0f64;
        for _ in 0..cfg.steps_per_epoch {
            // critic updates
            let mut last_ld = 0.0f64;
            for _ in 0..cfg.n_critic {
                let z = normal_tensor(b, cfg.z_dim, &mut z_rng);
                let g_batch = generator.forward_train_detached(&z)?;
                let m_batch = noise_batch_normalized(params, &norm, b, n, &mut data_rng);
                let u: Vec<f64> = (0..b).map(|_| u_rng.gen::<f64>()).collect();

                let mut tape = Tape::new();
                let binding = critic.bind(&mut tape);
                let g_node = tape.constant(g_batch);
                let m_node = tape.constant(m_batch);
                let loss = build_loss_d(&mut tape, &critic, &binding, g_node, m_node, &u, cfg.lambda_gp)?;
                let lv = tape.value(loss).item();
                if !lv.is_finite() {
                    return Err(CnsError::Diverged { step, what: "critic loss" });
                }
                last_ld = lv as f64;
                let grads = tape.backward(loss)?;
                let gvec: Vec<Option<Tensor>> = binding
                    .param_ids
                    .iter()
                    .map(|&id| grads.get(id).cloned())
                    .collect();
                adam_d.step(&mut critic.params_mut(), &gvec);
            }

            // generator update
            let z = normal_tensor(b, cfg.z_dim, &mut z_rng);
            let m_batch = noise_batch_normalized(params, &norm, b, n, &mut data_rng);
            let mut tape = Tape::new();
            let gb = generator.bind(&mut tape);
            let z_node = tape.constant(z);
            let m_node = tape.constant(m_batch);
            let (loss, _) = build_loss_g(&mut tape, &mut generator, &gb, &critic, z_node, m_node, cfg)?;
            let lv = tape.value(loss).item();
            if !lv.is_finite() {
                return Err(CnsError::Diverged { step, what: "generator loss" });
            }
            let grads = tape.backward(loss)?;
            let gvec: Vec<Option<Tensor>> = gb
                .param_ids
                .iter()
                .map(|&id| grads.get(id).cloned())
                .collect();
            adam_g.step(&mut generator.params_mut(), &gvec);

            epoch_ld += last_ld;
            epoch_lg += lv as f64;
            step += 1;
        }

        // W1 probe in physical units: denormalized draws vs fresh noise
        let rows = W1_PROBE / n;
        let z = normal_tensor(rows, cfg.z_dim, &mut probe_rng);
        let g = generator.forward_eval(&z)?;
        let denorm = norm.denormalize(g.data());
        let mut fresh = vec![0.0f64; denorm.len()];
        fill_mgin(params, &mut fresh, &mut probe_rng);
        let w1 = empirical_w1(&denorm, &fresh)?;

        history.push(EpochStats {
            epoch,
            loss_d: epoch_ld / cfg.steps_per_epoch as f64,
            loss_g: epoch_lg / cfg.steps_per_epoch as f64,
            w1,
        });
    }

    Ok(CnsModel {
        generator,
        critic,
        norm,
        config: *cfg,
        noise_params: *params,
        seed,
        history,
    })
}

/// Draw `rows` denormalized sequences from a trained simulator.
pub fn sample_cns(model: &CnsModel, rows: usize, seed: u64) -> NoiseBatch {
    let mut rng = stream(seed, 0);
    let z = model.draw_latents(rows, &mut rng);
    let g = model.generate_normalized(&z);
    let data = model.norm.denormalize(g.data());
    NoiseBatch::from_parts(rows, model.config.seq_len, data, model.noise_params, seed)
}
