//! Transceiver checkpoints.

use std::path::Path;

use serde_json::json;

use crate::tensor::{load_checkpoint, save_checkpoint, Network, TensorError};

use super::config::{MwcnnConfig, TransceiverConfig};
use super::model::{detector_specs, transmitter_specs, Mwcnn, TransceiverModel};
use super::E2eError;

pub fn save_transceiver(model: &TransceiverModel, path: &Path) -> Result<(), E2eError> {
    let mut entries = model.transmitter.state_entries("tx.");
    entries.extend(model.preprocessor.state_entries("pre."));
    entries.extend(model.detector.state_entries("det."));
    let meta = json!({
        "kind": "transceiver",
        "config": model.cfg,
        "mwcnn": model.preprocessor.cfg,
        "seed": model.seed,
    });
    save_checkpoint(path, &entries, &meta)?;
    Ok(())
}

pub fn load_transceiver(path: &Path) -> Result<TransceiverModel, E2eError> {
    let (entries, meta) = load_checkpoint(path)?;
    if meta.get("kind").and_then(|v| v.as_str()) != Some("transceiver") {
        return Err(TensorError::Checkpoint("archive is not a transceiver checkpoint".into()).into());
    }
    let cfg: TransceiverConfig = serde_json::from_value(
        meta.get("config")
            .cloned()
            .ok_or_else(|| TensorError::Checkpoint("transceiver meta: missing config".into()))?,
    )
    .map_err(|e| TensorError::Checkpoint(format!("transceiver meta: config: {e}")))?;
    let mw: MwcnnConfig = serde_json::from_value(
        meta.get("mwcnn")
            .cloned()
            .ok_or_else(|| TensorError::Checkpoint("transceiver meta: missing mwcnn".into()))?,
    )
    .map_err(|e| TensorError::Checkpoint(format!("transceiver meta: mwcnn: {e}")))?;
    let seed = meta.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);

    let mut rng = crate::noise::stream(0, 0);
    let mut model = TransceiverModel {
        transmitter: Network::from_specs(&transmitter_specs(), &mut rng),
        preprocessor: Mwcnn::new(&mw, &mut rng)?,
        detector: Network::from_specs(&detector_specs(), &mut rng),
        cfg,
        seed,
    };
    model.transmitter.load_state("tx.", &entries)?;
    model.preprocessor.load_state("pre.", &entries)?;
    model.detector.load_state("det.", &entries)?;
    Ok(model)
}
