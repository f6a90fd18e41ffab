//! Gradient-penalty support.
//!
//! The critic architectures used here are compositions of linear maps and
//! leaky-ReLU activations, so the input gradient has the closed form
//! `∇_x D = W_L · M_{L-1} · W_{L-1} · … · M_1 · W_1` with the activation
//! masks `M_i` diagonal and piecewise constant. Freezing the masks at the
//! evaluation point makes the penalty an explicit differentiable expression
//! in the weights; its parameter gradient is then obtained by an ordinary
//! first-order reverse sweep. For piecewise-linear critics this equals the
//! taped second-order gradient almost everywhere.

use super::nn::{Binding, Layer, Network};
use super::tape::{NodeId, Tape};
use super::tensor_impl::{Tensor, TensorError};

enum Event {
    Linear { w: NodeId },
    Mask { m: NodeId },
}

/// Forward the critic on `x_hat` while building the on-tape expression for
/// the per-row input gradient. Returns `(output, grad_x)` node ids.
///
/// Errors with `UnsupportedArchitecture` when the critic contains anything
/// other than linear layers and leaky-ReLU activations.
pub fn critic_input_gradient(
    net: &Network,
    tape: &mut Tape,
    binding: &Binding,
    x_hat: NodeId,
) -> Result<(NodeId, NodeId), TensorError> {
    let batch = tape.value(x_hat).shape()[0];
    let mut cur = x_hat;
    let mut events: Vec<Event> = Vec::new();
    let mut p = 0;
    for (idx, layer) in net.layers.iter().enumerate() {
        match layer {
            Layer::Linear { w, .. } => {
                let shape = tape.value(cur).shape().to_vec();
                let inputs = w.shape()[0];
                if shape.len() != 2 || shape[1] != inputs {
                    return Err(TensorError::ShapeMismatch {
                        context: format!("layer {idx} (linear)"),
                        expected: format!("[_, {inputs}]"),
                        got: format!("{shape:?}"),
                    });
                }
                let (wid, bid) = (binding.param_ids[p], binding.param_ids[p + 1]);
                p += 2;
                let z = tape.matmul(cur, wid);
                cur = tape.add_row_vec(z, bid);
                events.push(Event::Linear { w: wid });
            }
            Layer::Activation(super::nn::Act::LeakyRelu(slope)) => {
                let s = *slope;
                let mask = Tensor::new(
                    tape.value(cur).shape().to_vec(),
                    tape.value(cur)
                        .data()
                        .iter()
                        .map(|&z| if z > 0.0 { 1.0 } else { s })
                        .collect(),
                )
                .unwrap();
                let mid = tape.constant(mask);
                cur = tape.leaky_relu(cur, s);
                events.push(Event::Mask { m: mid });
            }
            other => {
                let kind = match other {
                    Layer::Conv1d { .. } => "conv1d",
                    Layer::BatchNorm1d { .. } => "batchnorm1d",
                    Layer::Activation(_) => "non-leaky activation",
                    Layer::Linear { .. } => unreachable!(),
                };
                return Err(TensorError::UnsupportedArchitecture(format!(
                    "critic layer {idx} is {kind}; only linear and leaky_relu are supported"
                )));
            }
        }
    }
    let out_shape = tape.value(cur).shape();
    if out_shape.len() != 2 || out_shape[1] != 1 {
        return Err(TensorError::ShapeMismatch {
            context: "critic output".into(),
            expected: "[batch, 1]".into(),
            got: format!("{out_shape:?}"),
        });
    }

    // reverse accumulation with frozen masks
    let mut g = tape.constant(Tensor::full(vec![batch, 1], 1.0));
    for ev in events.iter().rev() {
        g = match ev {
            Event::Linear { w } => tape.matmul_bt(g, *w),
            Event::Mask { m } => tape.mul(g, *m),
        };
    }
    Ok((cur, g))
}

/// Penalty node `mean_rows (‖∇_x D(x̂)‖₂ − 1)²` from a per-row gradient node.
/// A 1e-12 shift inside the square root guards the derivative at zero norm.
pub fn penalty_from_grad(tape: &mut Tape, grad_x: NodeId) -> NodeId {
    let sq = tape.square(grad_x);
    let rs = tape.row_sum(sq);
    let shifted = tape.add_scalar(rs, 1e-12);
    let norm = tape.sqrt(shifted);
    let dev = tape.add_scalar(norm, -1.0);
    let dev2 = tape.square(dev);
    tape.mean_all(dev2)
}

/// Standalone entry point: penalty value and its gradients with respect to
/// the critic parameters (aligned with `Network::params()` order).
pub fn grad_penalty_grad(
    critic: &Network,
    x_hat: &Tensor,
) -> Result<(f32, Vec<Option<Tensor>>), TensorError> {
    let mut tape = Tape::new();
    let binding = critic.bind(&mut tape);
    let x = tape.constant(x_hat.clone());
    let (_, grad_x) = critic_input_gradient(critic, &mut tape, &binding, x)?;
    let penalty = penalty_from_grad(&mut tape, grad_x);
    let grads = tape.backward(penalty)?;
    let out = binding
        .param_ids
        .iter()
        .map(|&id| grads.get(id).cloned())
        .collect();
    Ok((tape.value(penalty).item(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::nn::{Act, LayerSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_critic(w: Vec<f32>) -> Network {
        let n = w.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::from_specs(
            &[LayerSpec::Linear {
                inputs: n,
                outputs: 1,
            }],
            &mut rng,
        );
        if let Layer::Linear { w: wt, b } = &mut net.layers[0] {
            *wt = Tensor::new(vec![n, 1], w).unwrap();
            *b = Tensor::zeros(vec![1]);
        }
        net
    }

    #[test]
    fn linear_critic_penalty_matches_closed_form() {
        // D(x) = w·x: penalty = (‖w‖ − 1)², d/dw = 2(‖w‖ − 1) w / ‖w‖
        let w = vec![0.6f32, -0.8, 1.2]; // ‖w‖ = sqrt(0.36+0.64+1.44) = sqrt(2.44)
        let norm = (2.44f64).sqrt();
        let net = linear_critic(w.clone());
        let x_hat = Tensor::new(vec![4, 3], (0..12).map(|i| i as f32 * 0.1 - 0.5).collect()).unwrap();
        let (penalty, grads) = grad_penalty_grad(&net, &x_hat).unwrap();
        let expect = (norm - 1.0).powi(2);
        assert!((penalty as f64 - expect).abs() < 1e-6, "penalty {penalty} vs {expect}");
        let gw = grads[0].as_ref().unwrap();
        for (gi, wi) in gw.data().iter().zip(&w) {
            let want = 2.0 * (norm - 1.0) * (*wi as f64) / norm;
            assert!((*gi as f64 - want).abs() < 1e-5, "grad {gi} vs {want}");
        }
        // the bias is off the penalty's path: zero gradient, reported as None
        if let Some(gb) = grads[1].as_ref() {
            assert!(gb.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn unit_norm_critic_has_zero_penalty() {
        let net = linear_critic(vec![0.6, 0.8]); // ‖w‖ = 1
        let x_hat = Tensor::new(vec![2, 2], vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let (penalty, grads) = grad_penalty_grad(&net, &x_hat).unwrap();
        assert!(penalty.abs() < 1e-10, "penalty {penalty}");
        let gw = grads[0].as_ref().unwrap();
        assert!(gw.data().iter().all(|&v| v.abs() < 1e-6));
    }

    #[test]
    fn rejects_unsupported_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::from_specs(
            &[
                LayerSpec::Linear {
                    inputs: 4,
                    outputs: 1,
                },
                LayerSpec::Activation(Act::Tanh),
            ],
            &mut rng,
        );
        let x = Tensor::zeros(vec![2, 4]);
        let err = grad_penalty_grad(&net, &x).unwrap_err();
        assert!(matches!(err, TensorError::UnsupportedArchitecture(_)));
    }
}
