//! Central finite-difference gradient checks against the 64-bit shadow path.
//!
//! These helpers never touch the backward implementation: they only evaluate
//! the recorded forward graph in f64 at perturbed leaf values.

use super::tape::{NodeId, Tape};
use super::tensor_impl::Tensor;

/// Central finite difference of a scalar loss node with respect to every
/// element of a leaf, via f64 re-evaluation at `leaf ± h`.
pub fn finite_diff(tape: &Tape, loss: NodeId, leaf: NodeId, h: f64) -> Vec<f64> {
    let base: Vec<f64> = tape.value(leaf).to_f64();
    let mut out = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += h;
        let mut minus = base.clone();
        minus[i] -= h;
        let lp = tape.eval_f64(&[(leaf, plus)])[loss][0];
        let lm = tape.eval_f64(&[(leaf, minus)])[loss][0];
        out.push((lp - lm) / (2.0 * h));
    }
    out
}

/// Worst relative deviation between an implementation gradient and a finite
/// difference, with an absolute floor for near-zero pairs.
pub fn max_rel_error(impl_grad: &Tensor, fd: &[f64], atol: f64) -> f64 {
    assert_eq!(impl_grad.len(), fd.len());
    impl_grad
        .data()
        .iter()
        .zip(fd)
        .map(|(&a, &b)| {
            let a = a as f64;
            let diff = (a - b).abs();
            let denom = a.abs().max(b.abs());
            if denom < atol {
                0.0
            } else {
                diff / denom
            }
        })
        .fold(0.0, f64::max)
}

/// Check one leaf's gradient from an already-run backward pass against
/// central differences. Panics with context on failure.
pub fn assert_grad_close(
    tape: &Tape,
    loss: NodeId,
    leaf: NodeId,
    impl_grad: &Tensor,
    rtol: f64,
    what: &str,
) {
    let fd = finite_diff(tape, loss, leaf, 1e-4);
    let err = max_rel_error(impl_grad, &fd, 1e-6);
    assert!(
        err < rtol,
        "{what}: max relative gradient error {err:.3e} exceeds {rtol:.1e}\n impl: {:?}\n   fd: {fd:?}",
        impl_grad.data()
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_diff_recovers_polynomial_gradient() {
        // loss = sum(x^2) => d/dx = 2x
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![3], vec![0.5, -1.5, 2.0]).unwrap(), true);
        let s = tape.square(x);
        let loss = tape.sum_all(s);
        let fd = finite_diff(&tape, loss, x, 1e-4);
        for (f, v) in fd.iter().zip([1.0, -3.0, 4.0]) {
            assert!((f - v).abs() < 1e-6, "{f} vs {v}");
        }
    }
}
