//! End-to-end objectives: binary cross-entropy and mean-square error over
//! per-bit probabilities.

use crate::tensor::{NodeId, Tape, Tensor};

pub const BCE_CLAMP: f32 = 1e-7;

/// `-(1/L) Σ [s log ŝ + (1-s) log(1-ŝ)]`, probabilities clamped away from
/// the endpoints.
pub fn loss_bce(s: &[f32], soft: &[f32]) -> f64 {
    assert_eq!(s.len(), soft.len());
    let sum: f64 = s
        .iter()
        .zip(soft)
        .map(|(&si, &pi)| {
            let p = (pi as f64).clamp(BCE_CLAMP as f64, 1.0 - BCE_CLAMP as f64);
            (si as f64) * p.ln() + (1.0 - si as f64) * (1.0 - p).ln()
        })
        .sum();
    -sum / s.len() as f64
}

/// `(1/L) Σ (s - ŝ)²`
pub fn loss_mse(s: &[f32], soft: &[f32]) -> f64 {
    assert_eq!(s.len(), soft.len());
    s.iter()
        .zip(soft)
        .map(|(&si, &pi)| {
            let d = si as f64 - pi as f64;
            d * d
        })
        .sum::<f64>()
        / s.len() as f64
}

/// On-tape binary cross-entropy of a probability node against constant
/// targets (same shape).
pub fn build_loss_bce(tape: &mut Tape, soft: NodeId, targets: &Tensor) -> NodeId {
    let shape = tape.value(soft).shape().to_vec();
    assert_eq!(&shape, targets.shape(), "bce target shape");
    let ones_minus: Tensor = Tensor::new(
        shape.clone(),
        targets.data().iter().map(|&s| 1.0 - s).collect(),
    )
    .unwrap();
    let s_node = tape.constant(targets.clone());
    let s1_node = tape.constant(ones_minus);
    let lo = tape.clamp_min(soft, BCE_CLAMP);
    let p = tape.clamp_max(lo, 1.0 - BCE_CLAMP);
    let lp = tape.ln(p);
    let t1 = tape.mul(lp, s_node);
    let q = tape.rsub_scalar(p, 1.0);
    let lq = tape.ln(q);
    let t2 = tape.mul(lq, s1_node);
    let sum = tape.add(t1, t2);
    let mean = tape.mean_all(sum);
    tape.neg(mean)
}

/// On-tape mean-square error of a probability node against constant targets.
pub fn build_loss_mse(tape: &mut Tape, soft: NodeId, targets: &Tensor) -> NodeId {
    assert_eq!(tape.value(soft).shape(), targets.shape(), "mse target shape");
    let s_node = tape.constant(targets.clone());
    let d = tape.sub(soft, s_node);
    let d2 = tape.square(d);
    tape.mean_all(d2)
}
