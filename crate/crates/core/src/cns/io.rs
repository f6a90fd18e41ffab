//! Simulator checkpoints: tensor archive plus a JSON section holding the
//! normalizer, configuration, noise law and training history.

use std::path::Path;

use serde_json::json;

use crate::noise::{MginParams, StableParams};
use crate::tensor::{load_checkpoint, save_checkpoint, Network, TensorError};

use super::config::GanConfig;
use super::model::{build_generator, critic_specs, CnsModel, EpochStats};
use super::norm::NormState;
use super::CnsError;

pub fn save_cns(model: &CnsModel, path: &Path) -> Result<(), CnsError> {
    let mut entries = model.generator.state_entries("gen.");
    entries.extend(model.critic.state_entries("critic."));
    let history: Vec<serde_json::Value> = model
        .history
        .iter()
        .map(|h| json!({"epoch": h.epoch, "loss_d": h.loss_d, "loss_g": h.loss_g, "w1": h.w1}))
        .collect();
    let meta = json!({
        "kind": "cns",
        "norm": model.norm,
        "config": model.config,
        "noise": {
            "sigma2": model.noise_params.sigma2(),
            "alpha": model.noise_params.alpha(),
            "gamma": model.noise_params.gamma(),
        },
        "seed": model.seed,
        "history": history,
    });
    save_checkpoint(path, &entries, &meta)?;
    Ok(())
}

pub fn load_cns(path: &Path) -> Result<CnsModel, CnsError> {
    let (entries, meta) = load_checkpoint(path)?;
    let bad = |what: &str| TensorError::Checkpoint(format!("cns meta: missing or invalid {what}"));
    if meta.get("kind").and_then(|v| v.as_str()) != Some("cns") {
        return Err(TensorError::Checkpoint("archive is not a cns checkpoint".into()).into());
    }
    let norm: NormState = serde_json::from_value(meta.get("norm").cloned().ok_or_else(|| bad("norm"))?)
        .map_err(|e| TensorError::Checkpoint(format!("cns meta: norm: {e}")))?;
    let config: GanConfig =
        serde_json::from_value(meta.get("config").cloned().ok_or_else(|| bad("config"))?)
            .map_err(|e| TensorError::Checkpoint(format!("cns meta: config: {e}")))?;
    let noise = meta.get("noise").ok_or_else(|| bad("noise"))?;
    let get = |k: &str| noise.get(k).and_then(|v| v.as_f64()).ok_or_else(|| bad(k));
    let noise_params = MginParams::new(
        get("sigma2")?,
        StableParams::new(get("alpha")?, get("gamma")?)
            .map_err(|e| TensorError::Checkpoint(format!("cns meta: {e}")))?,
    )
    .map_err(|e| TensorError::Checkpoint(format!("cns meta: {e}")))?;
    let seed = meta.get("seed").and_then(|v| v.as_u64()).ok_or_else(|| bad("seed"))?;
    let history = meta
        .get("history")
        .and_then(|v| v.as_array())
        .map(|arr| {
            arr.iter()
                .map(|h| EpochStats {
                    epoch: h.get("epoch").and_then(|v| v.as_u64()).unwrap_or(0) as usize,
                    loss_d: h.get("loss_d").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    loss_g: h.get("loss_g").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    w1: h.get("w1").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                })
                .collect()
        })
        .unwrap_or_default();

    // rebuild the architectures, then overwrite every tensor from the archive
    let mut seed_rng = crate::noise::stream(0, 0);
    let mut generator = build_generator(config.z_dim, config.seq_len, &mut seed_rng);
    let mut critic = Network::from_specs(&critic_specs(config.seq_len), &mut seed_rng);
    generator.load_state("gen.", &entries)?;
    critic.load_state("critic.", &entries)?;

    Ok(CnsModel {
        generator,
        critic,
        norm,
        config,
        noise_params,
        seed,
        history,
    })
}
