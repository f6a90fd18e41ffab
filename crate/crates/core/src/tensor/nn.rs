//! Layer set and sequential network container.
//!
//! The layer vocabulary is deliberately small: linear, 1-D convolution with
//! stride 1 and zero same-padding, 1-D batch normalization and four pointwise
//! activations. Networks declare themselves as a list of [`LayerSpec`]s and
//! are instantiated with uniform fan-in initialization from a seeded stream.

use rand::Rng;

use super::kernels::{self, BnLayout};
use super::tape::{BnStats, NodeId, Tape};
use super::tensor_impl::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    Relu,
    LeakyRelu(f32),
    Tanh,
    Sigmoid,
}

/// Declarative layer description.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Linear { inputs: usize, outputs: usize },
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize },
    BatchNorm1d { features: usize },
    Activation(Act),
}

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

/// A layer with its parameters and (for batchnorm) running statistics.
#[derive(Debug, Clone)]
pub enum Layer {
    Linear {
        w: Tensor, // [in, out]
        b: Tensor, // [out]
    },
    Conv1d {
        w: Tensor, // [out_ch, in_ch, k]
        b: Tensor, // [out_ch]
        pad: usize,
    },
    BatchNorm1d {
        gamma: Tensor,
        beta: Tensor,
        running_mean: Tensor,
        running_var: Tensor,
        eps: f32,
        momentum: f32,
    },
    Activation(Act),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Tape leaf ids for one network's parameters, in `visit_params` order.
pub struct Binding {
    pub param_ids: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
}

fn uniform_init(rng: &mut impl Rng, shape: Vec<usize>, fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f32).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| rng.gen_range(-bound..bound))
        .collect::<Vec<f32>>();
    Tensor::new(shape, data).unwrap()
}

impl Network {
    pub fn from_specs(specs: &[LayerSpec], rng: &mut impl Rng) -> Self {
        let layers = specs
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Linear { inputs, outputs } => Layer::Linear {
                    w: uniform_init(rng, vec![inputs, outputs], inputs),
                    b: uniform_init(rng, vec![outputs], inputs),
                },
                LayerSpec::Conv1d { in_ch, out_ch, kernel } => {
                    assert!(kernel % 2 == 1, "same-padding needs an odd kernel");
                    let fan_in = in_ch * kernel;
                    Layer::Conv1d {
                        w: uniform_init(rng, vec![out_ch, in_ch, kernel], fan_in),
                        b: uniform_init(rng, vec![out_ch], fan_in),
                        pad: (kernel - 1) / 2,
                    }
                }
                LayerSpec::BatchNorm1d { features } => Layer::BatchNorm1d {
                    gamma: Tensor::full(vec![features], 1.0),
                    beta: Tensor::zeros(vec![features]),
                    running_mean: Tensor::zeros(vec![features]),
                    running_var: Tensor::full(vec![features], 1.0),
                    eps: BN_EPS,
                    momentum: BN_MOMENTUM,
                },
                LayerSpec::Activation(act) => Layer::Activation(act),
            })
            .collect();
        Network { layers }
    }

    /// Trainable parameters in a fixed traversal order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Linear { w, b } | Layer::Conv1d { w, b, .. } => {
                    out.push(w);
                    out.push(b);
                }
                Layer::BatchNorm1d { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Linear { w, b } | Layer::Conv1d { w, b, .. } => {
                    out.push(w);
                    out.push(b);
                }
                Layer::BatchNorm1d { gamma, beta, .. } => {
                    out.push(gamma);
                    out.push(beta);
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    /// All tensors that belong in a checkpoint, running statistics included.
    /// Names are `<prefix>l<i>.<field>`.
    pub fn state_entries(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Linear { w, b } | Layer::Conv1d { w, b, .. } => {
                    out.push((format!("{prefix}l{i}.w"), w.clone()));
                    out.push((format!("{prefix}l{i}.b"), b.clone()));
                }
                Layer::BatchNorm1d {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    out.push((format!("{prefix}l{i}.gamma"), gamma.clone()));
                    out.push((format!("{prefix}l{i}.beta"), beta.clone()));
                    out.push((format!("{prefix}l{i}.rmean"), running_mean.clone()));
                    out.push((format!("{prefix}l{i}.rvar"), running_var.clone()));
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    /// Restore tensors produced by [`Network::state_entries`].
    pub fn load_state(
        &mut self,
        prefix: &str,
        entries: &[(String, Tensor)],
    ) -> Result<(), TensorError> {
        let lookup = |name: &str| -> Result<&Tensor, TensorError> {
            entries
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing tensor {name}")))
        };
        let check = |name: &str, dst: &Tensor, src: &Tensor| -> Result<(), TensorError> {
            if dst.shape() != src.shape() {
                return Err(TensorError::Checkpoint(format!(
                    "tensor {name}: shape {:?} does not match model shape {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            Ok(())
        };
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Linear { w, b } | Layer::Conv1d { w, b, .. } => {
                    for (name, dst) in [(format!("{prefix}l{i}.w"), w), (format!("{prefix}l{i}.b"), b)] {
                        let src = lookup(&name)?;
                        check(&name, dst, src)?;
                        *dst = src.clone();
                    }
                }
                Layer::BatchNorm1d {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    ..
                } => {
                    for (name, dst) in [
                        (format!("{prefix}l{i}.gamma"), gamma),
                        (format!("{prefix}l{i}.beta"), beta),
                        (format!("{prefix}l{i}.rmean"), running_mean),
                        (format!("{prefix}l{i}.rvar"), running_var),
                    ] {
                        let src = lookup(&name)?;
                        check(&name, dst, src)?;
                        *dst = src.clone();
                    }
                }
                Layer::Activation(_) => {}
            }
        }
        Ok(())
    }

    /// Register parameter leaves on a tape. Call once per tape; the returned
    /// binding aligns with `params()` order.
    pub fn bind(&self, tape: &mut Tape) -> Binding {
        let param_ids = self
            .params()
            .iter()
            .map(|p| tape.leaf((*p).clone(), true))
            .collect();
        Binding { param_ids }
    }

    /// Parameter leaves registered as constants: gradients flow through the
    /// network to its input but the parameters themselves are frozen.
    pub fn bind_const(&self, tape: &mut Tape) -> Binding {
        let param_ids = self
            .params()
            .iter()
            .map(|p| tape.leaf((*p).clone(), false))
            .collect();
        Binding { param_ids }
    }

    /// Eval-mode forward on the tape without mutating the network (batchnorm
    /// uses running statistics and no update happens).
    pub fn apply_frozen(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        input: NodeId,
    ) -> Result<NodeId, TensorError> {
        let mut cur = input;
        let mut p = 0;
        for (idx, layer) in self.layers.iter().enumerate() {
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
                }
                Layer::Conv1d { w, pad, .. } => {
                    let shape = tape.value(cur).shape().to_vec();
                    let in_ch = w.shape()[1];
                    if shape.len() != 3 || shape[1] != in_ch {
                        return Err(TensorError::ShapeMismatch {
                            context: format!("layer {idx} (conv1d)"),
                            expected: format!("[_, {in_ch}, _]"),
                            got: format!("{shape:?}"),
                        });
                    }
                    let (wid, bid) = (binding.param_ids[p], binding.param_ids[p + 1]);
                    p += 2;
                    cur = tape.conv1d(cur, wid, bid, *pad);
                }
                Layer::BatchNorm1d {
                    gamma,
                    running_mean,
                    running_var,
                    eps,
                    ..
                } => {
                    let layout = Self::bn_layout(tape.value(cur).shape(), gamma.len(), idx)?;
                    let (gid, bid) = (binding.param_ids[p], binding.param_ids[p + 1]);
                    p += 2;
                    cur = tape.batchnorm(
                        cur,
                        gid,
                        bid,
                        layout,
                        *eps,
                        BnStats::Fixed {
                            mean: running_mean.data().to_vec(),
                            var: running_var.data().to_vec(),
                        },
                    );
                }
                Layer::Activation(act) => {
                    cur = match act {
                        Act::Relu => tape.relu(cur),
                        Act::LeakyRelu(s) => tape.leaky_relu(cur, *s),
                        Act::Tanh => tape.tanh(cur),
                        Act::Sigmoid => tape.sigmoid(cur),
                    };
                }
            }
        }
        Ok(cur)
    }

    fn bn_layout(shape: &[usize], features: usize, idx: usize) -> Result<BnLayout, TensorError> {
        match shape {
            [b, f] if *f == features => Ok(BnLayout::Feature2d {
                batch: *b,
                features: *f,
            }),
            [b, c, l] if *c == features => Ok(BnLayout::Channel3d {
                batch: *b,
                channels: *c,
                len: *l,
            }),
            _ => Err(TensorError::ShapeMismatch {
                context: format!("layer {idx} (batchnorm1d)"),
                expected: format!("[_, {features}] or [_, {features}, _]"),
                got: format!("{shape:?}"),
            }),
        }
    }

    /// Forward pass recorded on the tape. In train mode, batchnorm layers use
    /// batch statistics and update their running estimates as a side effect.
    pub fn apply(
        &mut self,
        tape: &mut Tape,
        binding: &Binding,
        input: NodeId,
        mode: Mode,
    ) -> Result<NodeId, TensorError> {
        let mut cur = input;
        let mut p = 0;
        for (idx, layer) in self.layers.iter_mut().enumerate() {
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
                }
                Layer::Conv1d { w, pad, .. } => {
                    let shape = tape.value(cur).shape().to_vec();
                    let in_ch = w.shape()[1];
                    if shape.len() != 3 || shape[1] != in_ch {
                        return Err(TensorError::ShapeMismatch {
                            context: format!("layer {idx} (conv1d)"),
                            expected: format!("[_, {in_ch}, _]"),
                            got: format!("{shape:?}"),
                        });
                    }
                    let (wid, bid) = (binding.param_ids[p], binding.param_ids[p + 1]);
                    p += 2;
                    cur = tape.conv1d(cur, wid, bid, *pad);
                }
                Layer::BatchNorm1d {
                    gamma,
                    running_mean,
                    running_var,
                    eps,
                    momentum,
                    ..
                } => {
                    let features = gamma.len();
                    let layout = Self::bn_layout(tape.value(cur).shape(), features, idx)?;
                    let (gid, bid) = (binding.param_ids[p], binding.param_ids[p + 1]);
                    p += 2;
                    match mode {
                        Mode::Train => {
                            let (id, mean, var) = tape.batchnorm_train(cur, gid, bid, layout, *eps);
                            // running update uses the unbiased variance
                            let m = layout.group_size() as f32;
                            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
                            for (r, v) in running_mean.data_mut().iter_mut().zip(&mean) {
                                *r = (1.0 - *momentum) * *r + *momentum * v;
                            }
                            for (r, v) in running_var.data_mut().iter_mut().zip(&var) {
                                *r = (1.0 - *momentum) * *r + *momentum * v * unbias;
                            }
                            cur = id;
                        }
                        Mode::Eval => {
                            cur = tape.batchnorm(
                                cur,
                                gid,
                                bid,
                                layout,
                                *eps,
                                BnStats::Fixed {
                                    mean: running_mean.data().to_vec(),
                                    var: running_var.data().to_vec(),
                                },
                            );
                        }
                    }
                }
                Layer::Activation(act) => {
                    cur = match act {
                        Act::Relu => tape.relu(cur),
                        Act::LeakyRelu(s) => tape.leaky_relu(cur, *s),
                        Act::Tanh => tape.tanh(cur),
                        Act::Sigmoid => tape.sigmoid(cur),
                    };
                }
            }
        }
        Ok(cur)
    }

    /// Tape-free eval-mode forward: running batchnorm statistics, no updates.
    /// Used by the Monte-Carlo hot paths.
    pub fn forward_eval(&self, input: &Tensor) -> Result<Tensor, TensorError> {
        let mut cur = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                Layer::Linear { w, b } => {
                    let shape = cur.shape();
                    let (inputs, outputs) = (w.shape()[0], w.shape()[1]);
                    if shape.len() != 2 || shape[1] != inputs {
                        return Err(TensorError::ShapeMismatch {
                            context: format!("layer {idx} (linear)"),
                            expected: format!("[_, {inputs}]"),
                            got: format!("{shape:?}"),
                        });
                    }
                    let m = shape[0];
                    let mut out = Tensor::zeros(vec![m, outputs]);
                    kernels::matmul(cur.data(), w.data(), m, inputs, outputs, out.data_mut());
                    kernels::add_row_vec(out.data_mut(), b.data(), outputs);
                    out
                }
                Layer::Conv1d { w, b, pad } => {
                    let shape = cur.shape();
                    let (out_ch, in_ch, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
                    if shape.len() != 3 || shape[1] != in_ch {
                        return Err(TensorError::ShapeMismatch {
                            context: format!("layer {idx} (conv1d)"),
                            expected: format!("[_, {in_ch}, _]"),
                            got: format!("{shape:?}"),
                        });
                    }
                    let (bs, l) = (shape[0], shape[2]);
                    let mut out = Tensor::zeros(vec![bs, out_ch, l]);
                    kernels::conv1d(
                        cur.data(),
                        w.data(),
                        b.data(),
                        bs,
                        in_ch,
                        l,
                        out_ch,
                        k,
                        *pad,
                        out.data_mut(),
                    );
                    out
                }
                Layer::BatchNorm1d {
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                    eps,
                    ..
                } => {
                    let layout = Self::bn_layout(cur.shape(), gamma.len(), idx)?;
                    let mut out = Tensor::zeros(cur.shape().to_vec());
                    kernels::bn_normalize(
                        cur.data(),
                        running_mean.data(),
                        running_var.data(),
                        gamma.data(),
                        beta.data(),
                        *eps,
                        layout,
                        out.data_mut(),
                    );
                    out
                }
                Layer::Activation(act) => {
                    let f: fn(f32, f32) -> f32 = match act {
                        Act::Relu => |x, _| x.max(0.0),
                        Act::LeakyRelu(_) => |x, s| if x > 0.0 { x } else { s * x },
                        Act::Tanh => |x, _| x.tanh(),
                        Act::Sigmoid => |x, _| 1.0 / (1.0 + (-x).exp()),
                    };
                    let s = if let Act::LeakyRelu(s) = act { *s } else { 0.0 };
                    let data = cur.data().iter().map(|&x| f(x, s)).collect();
                    Tensor::new(cur.shape().to_vec(), data)?
                }
            };
        }
        Ok(cur)
    }

    /// Tape-free train-mode forward: batch statistics, running stats updated.
    /// Used when sampling from a network mid-training without recording
    /// gradients (e.g. generator draws during critic updates).
    pub fn forward_train_detached(&mut self, input: &Tensor) -> Result<Tensor, TensorError> {
        // Route through a scratch tape: correctness over speed is fine here,
        // these networks are small.
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape);
        let x = tape.constant(input.clone());
        let out = self.apply(&mut tape, &binding, x, Mode::Train)?;
        Ok(tape.value(out).clone())
    }
}

/// Convenience wrapper implementing the spec'd forward entry point: builds a
/// fresh tape in train mode, or runs tape-free in eval mode.
pub fn forward(
    net: &mut Network,
    input: &Tensor,
    mode: Mode,
) -> Result<(Tensor, Option<Tape>), TensorError> {
    match mode {
        Mode::Eval => Ok((net.forward_eval(input)?, None)),
        Mode::Train => {
            let mut tape = Tape::new();
            let binding = net.bind(&mut tape);
            let x = tape.constant(input.clone());
            let out = net.apply(&mut tape, &binding, x, Mode::Train)?;
            let v = tape.value(out).clone();
            Ok((v, Some(tape)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_linear_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Network::from_specs(
            &[LayerSpec::Linear {
                inputs: 3,
                outputs: 3,
            }],
            &mut rng,
        );
        if let Layer::Linear { w, b } = &mut net.layers[0] {
            let eye: Vec<f32> = (0..9).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
            *w = Tensor::new(vec![3, 3], eye).unwrap();
            *b = Tensor::zeros(vec![3]);
        }
        let x = Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.25]).unwrap();
        let y = net.forward_eval(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn tanh_output_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Network::from_specs(&[LayerSpec::Activation(Act::Tanh)], &mut rng);
        let x = Tensor::new(vec![1, 4], vec![-50.0, -1.0, 1.0, 50.0]).unwrap();
        let y = net.forward_eval(&x).unwrap();
        assert!(y.data().iter().all(|&v| v > -1.0 - 1e-6 && v < 1.0 + 1e-6));
        assert!(y.data().iter().all(|&v| v.abs() <= 1.0));
    }

    #[test]
    fn conv_same_padding_preserves_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Network::from_specs(
            &[LayerSpec::Conv1d {
                in_ch: 2,
                out_ch: 5,
                kernel: 3,
            }],
            &mut rng,
        );
        let x = Tensor::zeros(vec![1, 2, 128]);
        let y = net.forward_eval(&x).unwrap();
        assert_eq!(y.shape(), &[1, 5, 128]);
    }

    #[test]
    fn shape_error_names_offending_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Network::from_specs(
            &[
                LayerSpec::Linear {
                    inputs: 4,
                    outputs: 4,
                },
                LayerSpec::Linear {
                    inputs: 5,
                    outputs: 2,
                },
            ],
            &mut rng,
        );
        let x = Tensor::zeros(vec![1, 4]);
        let Err(err) = forward(&mut net, &x, Mode::Train) else {
            panic!("expected a shape error");
        };
        let msg = err.to_string();
        assert!(msg.contains("layer 1"), "got: {msg}");
    }

    #[test]
    fn batchnorm_train_mode_standardizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = Network::from_specs(&[LayerSpec::BatchNorm1d { features: 2 }], &mut rng);
        let n = 64;
        let mut data = Vec::with_capacity(n * 2);
        for i in 0..n {
            data.push(3.0 + (i as f32) * 0.1); // feature 0: mean 3-ish
            data.push(-1.0 + ((i * 7) % 13) as f32); // feature 1
        }
        let x = Tensor::new(vec![n, 2], data).unwrap();
        let (y, _) = forward(&mut net, &x, Mode::Train).unwrap();
        for f in 0..2 {
            let vals: Vec<f32> = y.data().iter().skip(f).step_by(2).copied().collect();
            let mean: f32 = vals.iter().sum::<f32>() / n as f32;
            let var: f32 = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n as f32;
            assert!(mean.abs() < 1e-5, "feature {f} mean {mean}");
            assert!((var - 1.0).abs() < 1e-4, "feature {f} var {var}");
        }
    }
}
