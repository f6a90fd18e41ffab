//! Four-state MSK trellis.
//!
//! States are the accumulated excess phase {0, π/2, π, 3π/2}. An input bit
//! advances the state by ±π/2 and emits one bit period of the corresponding
//! branch waveform. The trellis is stationary only when the carrier completes
//! an integer number of cycles per bit, so construction requires integral
//! `carrier_cycles_per_bit`.

use super::msk::{msk_phase, MskConfig};
use super::ClassicalError;

#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub next_state: usize,
    /// Waveform samples are stored per (state, bit) in `Trellis::waveforms`.
    pub waveform_idx: usize,
}

#[derive(Debug, Clone)]
pub struct Trellis {
    pub cfg: MskConfig,
    /// `transitions[state][bit]`
    pub transitions: [[Transition; 2]; 4],
    /// Branch waveforms, `samples_per_bit` samples each, indexed by
    /// `state * 2 + bit`.
    waveforms: Vec<Vec<f64>>,
}

impl Trellis {
    pub fn new(cfg: &MskConfig) -> Result<Self, ClassicalError> {
        cfg.validate()?;
        let c = cfg.carrier_cycles_per_bit;
        if (c - c.round()).abs() > 1e-12 || c.round() < 1.0 {
            return Err(ClassicalError::InvalidParameter(format!(
                "a stationary trellis needs an integer carrier_cycles_per_bit, got {c}"
            )));
        }
        let s = cfg.samples_per_bit;
        let amp = cfg.amplitude();
        let mut waveforms = Vec::with_capacity(8);
        let mut transitions = [[Transition {
            next_state: 0,
            waveform_idx: 0,
        }; 2]; 4];
        for state in 0..4 {
            for bit in 0..2 {
                let a = if bit == 1 { 1.0 } else { -1.0 };
                let wf: Vec<f64> = (0..s)
                    .map(|j| amp * msk_phase(cfg, 0, j, state as i64, a).cos())
                    .collect();
                let next_state = ((state as i64) + if bit == 1 { 1 } else { -1 }).rem_euclid(4) as usize;
                transitions[state][bit] = Transition {
                    next_state,
                    waveform_idx: waveforms.len(),
                };
                waveforms.push(wf);
            }
        }
        Ok(Trellis {
            cfg: *cfg,
            transitions,
            waveforms,
        })
    }

    #[inline]
    pub fn waveform(&self, state: usize, bit: usize) -> &[f64] {
        &self.waveforms[self.transitions[state][bit].waveform_idx]
    }

    pub fn samples_per_bit(&self) -> usize {
        self.cfg.samples_per_bit
    }
}
