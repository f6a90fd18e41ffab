//! Viterbi sequence detection over the MSK trellis.
//!
//! Minimizes the summed per-sample branch cost. The transmitter starts at
//! zero phase, so the initial metric pins state 0. Ties break toward the
//! smaller state index at both merges and termination, making decoding
//! deterministic.

use super::metric::BranchMetric;
use super::trellis::Trellis;
use super::ClassicalError;

pub fn viterbi_detect(
    samples: &[f64],
    trellis: &Trellis,
    metric: &BranchMetric,
) -> Result<Vec<u8>, ClassicalError> {
    let s = trellis.samples_per_bit();
    if samples.is_empty() || samples.len() % s != 0 {
        return Err(ClassicalError::Framing(format!(
            "sample count {} is not a positive multiple of samples_per_bit {}",
            samples.len(),
            s
        )));
    }
    let n_bits = samples.len() / s;
    let mut metrics = [f64::INFINITY; 4];
    metrics[0] = 0.0;
    // survivor[step][next_state] = (prev_state, bit)
    let mut survivors: Vec<[(u8, u8); 4]> = Vec::with_capacity(n_bits);

    for k in 0..n_bits {
        let window = &samples[k * s..(k + 1) * s];
        let mut next = [f64::INFINITY; 4];
        let mut surv = [(0u8, 0u8); 4];
        for state in 0..4 {
            if !metrics[state].is_finite() {
                continue;
            }
            for bit in 0..2 {
                let tr = trellis.transitions[state][bit];
                let wf = trellis.waveform(state, bit);
                let mut cost = 0.0;
                for (y, w) in window.iter().zip(wf) {
                    cost += metric.cost(y - w);
                }
                let cand = metrics[state] + cost;
                // strict <: on ties the earlier (smaller-index) predecessor wins
                if cand < next[tr.next_state] {
                    next[tr.next_state] = cand;
                    surv[tr.next_state] = (state as u8, bit as u8);
                }
            }
        }
        metrics = next;
        survivors.push(surv);
    }

    // best final state, smaller index on ties
    let mut best = 0usize;
    for state in 1..4 {
        if metrics[state] < metrics[best] {
            best = state;
        }
    }
    let mut bits = vec![0u8; n_bits];
    let mut state = best;
    for k in (0..n_bits).rev() {
        let (prev, bit) = survivors[k][state];
        bits[k] = bit;
        state = prev as usize;
    }
    Ok(bits)
}
