//! Recorded computation graph with reverse-mode gradients.
//!
//! A [`Tape`] is an append-only list of tensor-valued nodes; appending order
//! is the topological order, so [`Tape::backward`] is a single reverse sweep
//! that visits every node exactly once. Nodes record which parents they read,
//! and gradients accumulate additively, which makes the gradient of a sum of
//! losses the sum of the individual gradients by construction.
//!
//! Besides the f32 forward/backward pair used for training, the tape can
//! replay its recorded graph in 64-bit arithmetic with selected leaves
//! overridden ([`Tape::eval_f64`]). Gradient-check tests perturb leaf values
//! through that path to form central finite differences without touching the
//! backward implementation under test.

use super::kernels::{self, BnLayout};
use super::tensor_impl::{Tensor, TensorError};

pub type NodeId = usize;

/// Saved statistics for a batch-normalization node.
#[derive(Debug, Clone)]
pub enum BnStats {
    /// Train mode: statistics of the recorded batch (saved for backward; the
    /// 64-bit replay recomputes them from the replayed input).
    Batch { mean: Vec<f32>, var: Vec<f32> },
    /// Eval mode: a frozen snapshot of the running statistics.
    Fixed { mean: Vec<f32>, var: Vec<f32> },
}

#[derive(Debug, Clone)]
pub enum Op {
    Leaf { requires_grad: bool },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Neg(NodeId),
    Scale(NodeId, f32),
    AddScalar(NodeId, f32),
    /// c - x
    RsubScalar(NodeId, f32),
    Recip(NodeId),
    Sqrt(NodeId),
    Square(NodeId),
    Ln(NodeId),
    ClampMin(NodeId, f32),
    ClampMax(NodeId, f32),
    /// [m,k] · [k,n]
    MatMul(NodeId, NodeId),
    /// [m,n] · [k,n]ᵀ -> [m,k]
    MatMulBt(NodeId, NodeId),
    /// [b,f] + broadcast [f]
    AddRowVec(NodeId, NodeId),
    /// x * s with s a scalar node
    MulScalar(NodeId, NodeId),
    Conv1d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        pad: usize,
    },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        layout: BnLayout,
        eps: f32,
        stats: BnStats,
    },
    Relu(NodeId),
    LeakyRelu(NodeId, f32),
    Tanh(NodeId),
    Sigmoid(NodeId),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// [b,f] -> [b]
    RowSum(NodeId),
    Reshape(NodeId),
    Dwt1(NodeId),
    Iwt1(NodeId),
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients keyed by node id after a backward pass.
pub struct Grads {
    by_node: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.by_node.get(id).and_then(|g| g.as_ref())
    }

    /// Gradient for `id`, densified to zeros of the given shape when the node
    /// did not participate in the loss.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape.to_vec()),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        matches!(self.nodes[id].op, Op::Leaf { requires_grad: true })
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        debug_assert!(value.all_finite(), "non-finite forward value");
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    /// Register an input or parameter leaf.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf { requires_grad }, value)
    }

    /// Constant leaf (no gradient).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) {
        assert_eq!(
            self.value(a).shape(),
            self.value(b).shape(),
            "{what}: operand shapes differ"
        );
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.same_shape(a, b, "add");
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.same_shape(a, b, "sub");
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.same_shape(a, b, "mul");
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| -x);
        self.push(Op::Neg(a), v)
    }

    pub fn scale(&mut self, a: NodeId, c: f32) -> NodeId {
        let v = map(self.value(a), |x| c * x);
        self.push(Op::Scale(a, c), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f32) -> NodeId {
        let v = map(self.value(a), |x| x + c);
        self.push(Op::AddScalar(a, c), v)
    }

    pub fn rsub_scalar(&mut self, a: NodeId, c: f32) -> NodeId {
        let v = map(self.value(a), |x| c - x);
        self.push(Op::RsubScalar(a, c), v)
    }

    pub fn recip(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| 1.0 / x);
        self.push(Op::Recip(a), v)
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f32::sqrt);
        self.push(Op::Sqrt(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f32::ln);
        self.push(Op::Ln(a), v)
    }

    pub fn clamp_min(&mut self, a: NodeId, c: f32) -> NodeId {
        let v = map(self.value(a), |x| x.max(c));
        self.push(Op::ClampMin(a, c), v)
    }

    pub fn clamp_max(&mut self, a: NodeId, c: f32) -> NodeId {
        let v = map(self.value(a), |x| x.min(c));
        self.push(Op::ClampMax(a, c), v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        assert!(sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0], "matmul shapes {sa:?} x {sb:?}");
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = Tensor::zeros(vec![m, n]);
        kernels::matmul(
            self.value(a).data(),
            self.value(b).data(),
            m,
            k,
            n,
            out.data_mut(),
        );
        self.push(Op::MatMul(a, b), out)
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        assert!(sa.len() == 2 && sb.len() == 2 && sa[1] == sb[1], "matmul_bt shapes {sa:?} x {sb:?}ᵀ");
        let (m, n, k) = (sa[0], sa[1], sb[0]);
        let mut out = Tensor::zeros(vec![m, k]);
        kernels::matmul_bt(
            self.value(a).data(),
            self.value(b).data(),
            m,
            n,
            k,
            out.data_mut(),
        );
        self.push(Op::MatMulBt(a, b), out)
    }

    pub fn add_row_vec(&mut self, a: NodeId, v: NodeId) -> NodeId {
        let (sa, sv) = (self.value(a).shape(), self.value(v).shape());
        assert!(sa.len() == 2 && sv.len() == 1 && sa[1] == sv[0], "add_row_vec shapes {sa:?} + {sv:?}");
        let mut out = self.value(a).clone();
        kernels::add_row_vec(out.data_mut(), self.value(v).data(), sa[1]);
        self.push(Op::AddRowVec(a, v), out)
    }

    pub fn mul_scalar(&mut self, a: NodeId, s: NodeId) -> NodeId {
        assert!(self.value(s).is_scalar(), "mul_scalar: rhs must be scalar");
        let sv = self.value(s).item();
        let v = map(self.value(a), |x| x * sv);
        self.push(Op::MulScalar(a, s), v)
    }

    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, pad: usize) -> NodeId {
        let (sx, sw, sb) = (
            self.value(x).shape().to_vec(),
            self.value(w).shape().to_vec(),
            self.value(b).shape().to_vec(),
        );
        assert!(
            sx.len() == 3 && sw.len() == 3 && sb.len() == 1 && sx[1] == sw[1] && sw[0] == sb[0],
            "conv1d shapes x{sx:?} w{sw:?} b{sb:?}"
        );
        let (bs, ci, l, co, k) = (sx[0], sx[1], sx[2], sw[0], sw[2]);
        let mut out = Tensor::zeros(vec![bs, co, l]);
        kernels::conv1d(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            bs,
            ci,
            l,
            co,
            k,
            pad,
            out.data_mut(),
        );
        self.push(Op::Conv1d { x, w, b, pad }, out)
    }

    /// Batch-normalize with explicitly chosen statistics.
    ///
    /// For `BnStats::Batch` callers must pass statistics computed from the
    /// value of `x` (see `Tape::batchnorm_train`); for `BnStats::Fixed` any
    /// frozen statistics are accepted.
    pub fn batchnorm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        layout: BnLayout,
        eps: f32,
        stats: BnStats,
    ) -> NodeId {
        let nf = layout.features();
        assert_eq!(self.value(gamma).len(), nf, "batchnorm gamma size");
        assert_eq!(self.value(beta).len(), nf, "batchnorm beta size");
        let (mean, var) = match &stats {
            BnStats::Batch { mean, var } | BnStats::Fixed { mean, var } => {
                (mean.clone(), var.clone())
            }
        };
        let mut out = Tensor::zeros(self.value(x).shape().to_vec());
        kernels::bn_normalize(
            self.value(x).data(),
            &mean,
            &var,
            self.value(gamma).data(),
            self.value(beta).data(),
            eps,
            layout,
            out.data_mut(),
        );
        self.push(
            Op::BatchNorm {
                x,
                gamma,
                beta,
                layout,
                eps,
                stats,
            },
            out,
        )
    }

    /// Train-mode batchnorm: computes batch statistics from `x` and returns
    /// them alongside the node so the caller can update running estimates.
    pub fn batchnorm_train(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        layout: BnLayout,
        eps: f32,
    ) -> (NodeId, Vec<f32>, Vec<f32>) {
        let (mean, var) = kernels::bn_batch_stats(self.value(x).data(), layout);
        let id = self.batchnorm(
            x,
            gamma,
            beta,
            layout,
            eps,
            BnStats::Batch {
                mean: mean.clone(),
                var: var.clone(),
            },
        );
        (id, mean, var)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f32) -> NodeId {
        let v = map(self.value(a), |x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), f32::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = map(self.value(a), |x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), v)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f32 = self.value(a).data().iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(s))
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len() as f32;
        let s: f32 = self.value(a).data().iter().sum();
        self.push(Op::MeanAll(a), Tensor::scalar(s / n))
    }

    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let sa = self.value(a).shape();
        assert_eq!(sa.len(), 2, "row_sum expects a matrix");
        let (rows, cols) = (sa[0], sa[1]);
        let mut out = Tensor::zeros(vec![rows]);
        for (r, chunk) in self.value(a).data().chunks(cols).enumerate() {
            out.data_mut()[r] = chunk.iter().sum();
        }
        self.push(Op::RowSum(a), out)
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        let v = self
            .value(a)
            .reshaped(shape)
            .expect("reshape element count");
        self.push(Op::Reshape(a), v)
    }

    /// Haar analysis on the trailing axis: [.., c, l] -> [.., 2c, l/2].
    pub fn dwt1(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).shape().to_vec();
        assert!(s.len() >= 2 && s[s.len() - 1] % 2 == 0, "dwt1 shape {s:?}");
        let (c, l) = (s[s.len() - 2], s[s.len() - 1]);
        let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
        let mut out_shape = s.clone();
        let d = out_shape.len();
        out_shape[d - 2] = 2 * c;
        out_shape[d - 1] = l / 2;
        let mut out = Tensor::zeros(out_shape);
        kernels::dwt1(self.value(a).data(), groups, c, l, out.data_mut());
        self.push(Op::Dwt1(a), out)
    }

    /// Haar synthesis: [.., 2c, l/2] -> [.., c, l].
    pub fn iwt1(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).shape().to_vec();
        assert!(s.len() >= 2 && s[s.len() - 2] % 2 == 0, "iwt1 shape {s:?}");
        let (c2, h) = (s[s.len() - 2], s[s.len() - 1]);
        let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
        let mut out_shape = s.clone();
        let d = out_shape.len();
        out_shape[d - 2] = c2 / 2;
        out_shape[d - 1] = h * 2;
        let mut out = Tensor::zeros(out_shape);
        kernels::iwt1(self.value(a).data(), groups, c2, h, out.data_mut());
        self.push(Op::Iwt1(a), out)
    }

    // -----------------------------------------------------------------------
    // Backward
    // -----------------------------------------------------------------------

    /// Reverse sweep from a scalar loss node. Returns gradient tensors for
    /// every node that influences the loss, including grad-enabled leaves.
    pub fn backward(&self, loss: NodeId) -> Result<Grads, TensorError> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(TensorError::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss] = Some(Tensor::scalar(1.0));
        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            self.backward_node(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Grads { by_node: grads })
    }

    fn backward_node(&self, id: NodeId, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], p: NodeId, contrib: Tensor| {
            match &mut grads[p] {
                Some(t) => {
                    for (d, s) in t.data_mut().iter_mut().zip(contrib.data()) {
                        *d += s;
                    }
                }
                slot @ None => *slot = Some(contrib),
            }
        };
        match &self.nodes[id].op {
            Op::Leaf { .. } => {}
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, map(g, |x| -x));
            }
            Op::Mul(a, b) => {
                acc(grads, *a, zip_map(g, self.value(*b), |gv, bv| gv * bv));
                acc(grads, *b, zip_map(g, self.value(*a), |gv, av| gv * av));
            }
            Op::Neg(a) => acc(grads, *a, map(g, |x| -x)),
            Op::Scale(a, c) => acc(grads, *a, map(g, |x| c * x)),
            Op::AddScalar(a, _) => acc(grads, *a, g.clone()),
            Op::RsubScalar(a, _) => acc(grads, *a, map(g, |x| -x)),
            Op::Recip(a) => {
                acc(
                    grads,
                    *a,
                    zip_map(g, self.value(*a), |gv, av| -gv / (av * av)),
                );
            }
            Op::Sqrt(a) => {
                // uses the output value: d sqrt = g / (2 sqrt)
                acc(grads, *a, zip_map(g, &self.nodes[id].value, |gv, yv| gv / (2.0 * yv)));
            }
            Op::Square(a) => {
                acc(grads, *a, zip_map(g, self.value(*a), |gv, av| 2.0 * av * gv));
            }
            Op::Ln(a) => {
                acc(grads, *a, zip_map(g, self.value(*a), |gv, av| gv / av));
            }
            Op::ClampMin(a, c) => {
                let c = *c;
                acc(
                    grads,
                    *a,
                    zip_map(g, self.value(*a), |gv, av| if av >= c { gv } else { 0.0 }),
                );
            }
            Op::ClampMax(a, c) => {
                let c = *c;
                acc(
                    grads,
                    *a,
                    zip_map(g, self.value(*a), |gv, av| if av <= c { gv } else { 0.0 }),
                );
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let mut ga = Tensor::zeros(vec![m, k]);
                kernels::matmul_bt(g.data(), self.value(*b).data(), m, n, k, ga.data_mut());
                let mut gb = Tensor::zeros(vec![k, n]);
                kernels::matmul_at(self.value(*a).data(), g.data(), m, k, n, gb.data_mut());
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::MatMulBt(a, b) => {
                // out = a·bᵀ with a:[m,n], b:[k,n]
                let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                let (m, n, k) = (sa[0], sa[1], sb[0]);
                let mut ga = Tensor::zeros(vec![m, n]);
                kernels::matmul(g.data(), self.value(*b).data(), m, k, n, ga.data_mut());
                let mut gb = Tensor::zeros(vec![k, n]);
                kernels::matmul_at(g.data(), self.value(*a).data(), m, k, n, gb.data_mut());
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::AddRowVec(a, v) => {
                let cols = self.value(*v).len();
                acc(grads, *a, g.clone());
                let mut gv = Tensor::zeros(vec![cols]);
                for row in g.data().chunks(cols) {
                    for (d, s) in gv.data_mut().iter_mut().zip(row) {
                        *d += s;
                    }
                }
                acc(grads, *v, gv);
            }
            Op::MulScalar(a, s) => {
                let sv = self.value(*s).item();
                acc(grads, *a, map(g, |x| x * sv));
                let dot: f32 = g
                    .data()
                    .iter()
                    .zip(self.value(*a).data())
                    .map(|(gv, av)| gv * av)
                    .sum();
                acc(grads, *s, Tensor::scalar(dot));
            }
            Op::Conv1d { x, w, b, pad } => {
                let (sx, sw) = (self.value(*x).shape(), self.value(*w).shape());
                let (bs, ci, l, co, k) = (sx[0], sx[1], sx[2], sw[0], sw[2]);
                let mut gx = Tensor::zeros(vec![bs, ci, l]);
                kernels::conv1d_grad_x(g.data(), self.value(*w).data(), bs, ci, l, co, k, *pad, gx.data_mut());
                let mut gw = Tensor::zeros(vec![co, ci, k]);
                kernels::conv1d_grad_w(self.value(*x).data(), g.data(), bs, ci, l, co, k, *pad, gw.data_mut());
                let mut gb = Tensor::zeros(vec![co]);
                kernels::conv1d_grad_b(g.data(), bs, co, l, gb.data_mut());
                acc(grads, *x, gx);
                acc(grads, *w, gw);
                acc(grads, *b, gb);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                layout,
                eps,
                stats,
            } => {
                let nf = layout.features();
                let mut gx = Tensor::zeros(self.value(*x).shape().to_vec());
                let mut ggamma = Tensor::zeros(vec![nf]);
                let mut gbeta = Tensor::zeros(vec![nf]);
                match stats {
                    BnStats::Batch { mean, var } => kernels::bn_backward(
                        self.value(*x).data(),
                        g.data(),
                        mean,
                        var,
                        self.value(*gamma).data(),
                        *eps,
                        *layout,
                        gx.data_mut(),
                        ggamma.data_mut(),
                        gbeta.data_mut(),
                    ),
                    BnStats::Fixed { mean, var } => kernels::bn_backward_eval(
                        self.value(*x).data(),
                        g.data(),
                        mean,
                        var,
                        self.value(*gamma).data(),
                        *eps,
                        *layout,
                        gx.data_mut(),
                        ggamma.data_mut(),
                        gbeta.data_mut(),
                    ),
                }
                acc(grads, *x, gx);
                acc(grads, *gamma, ggamma);
                acc(grads, *beta, gbeta);
            }
            Op::Relu(a) => {
                acc(
                    grads,
                    *a,
                    zip_map(g, self.value(*a), |gv, av| if av > 0.0 { gv } else { 0.0 }),
                );
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                acc(
                    grads,
                    *a,
                    zip_map(g, self.value(*a), |gv, av| if av > 0.0 { gv } else { s * gv }),
                );
            }
            Op::Tanh(a) => {
                acc(grads, *a, zip_map(g, &self.nodes[id].value, |gv, yv| gv * (1.0 - yv * yv)));
            }
            Op::Sigmoid(a) => {
                acc(grads, *a, zip_map(g, &self.nodes[id].value, |gv, yv| gv * yv * (1.0 - yv)));
            }
            Op::SumAll(a) => {
                let gv = g.item();
                acc(grads, *a, Tensor::full(self.value(*a).shape().to_vec(), gv));
            }
            Op::MeanAll(a) => {
                let n = self.value(*a).len() as f32;
                acc(grads, *a, Tensor::full(self.value(*a).shape().to_vec(), g.item() / n));
            }
            Op::RowSum(a) => {
                let sa = self.value(*a).shape();
                let (rows, cols) = (sa[0], sa[1]);
                let mut ga = Tensor::zeros(vec![rows, cols]);
                for r in 0..rows {
                    let gv = g.data()[r];
                    for d in &mut ga.data_mut()[r * cols..(r + 1) * cols] {
                        *d = gv;
                    }
                }
                acc(grads, *a, ga);
            }
            Op::Reshape(a) => {
                let target = self.value(*a).shape().to_vec();
                acc(grads, *a, g.reshaped(target).expect("reshape grad"));
            }
            Op::Dwt1(a) => {
                // orthonormal: adjoint of analysis is synthesis
                let s = g.shape().to_vec();
                let (c2, h) = (s[s.len() - 2], s[s.len() - 1]);
                let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
                let mut ga = Tensor::zeros(self.value(*a).shape().to_vec());
                kernels::iwt1(g.data(), groups, c2, h, ga.data_mut());
                acc(grads, *a, ga);
            }
            Op::Iwt1(a) => {
                let s = g.shape().to_vec();
                let (c, l) = (s[s.len() - 2], s[s.len() - 1]);
                let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
                let mut ga = Tensor::zeros(self.value(*a).shape().to_vec());
                kernels::dwt1(g.data(), groups, c, l, ga.data_mut());
                acc(grads, *a, ga);
            }
        }
    }

    // -----------------------------------------------------------------------
    // 64-bit shadow evaluation
    // -----------------------------------------------------------------------

    /// Replay the recorded graph in f64, with selected leaves overridden.
    ///
    /// Train-mode batchnorm nodes recompute their statistics from the replayed
    /// input, so perturbing a leaf propagates through the statistics exactly
    /// as in the real forward pass.
    pub fn eval_f64(&self, overrides: &[(NodeId, Vec<f64>)]) -> Vec<Vec<f64>> {
        let mut vals: Vec<Vec<f64>> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let v = match &node.op {
                Op::Leaf { .. } => overrides
                    .iter()
                    .find(|(oid, _)| *oid == id)
                    .map(|(_, ov)| ov.clone())
                    .unwrap_or_else(|| node.value.to_f64()),
                Op::Add(a, b) => zip64(&vals[*a], &vals[*b], |x, y| x + y),
                Op::Sub(a, b) => zip64(&vals[*a], &vals[*b], |x, y| x - y),
                Op::Mul(a, b) => zip64(&vals[*a], &vals[*b], |x, y| x * y),
                Op::Neg(a) => vals[*a].iter().map(|x| -x).collect(),
                Op::Scale(a, c) => vals[*a].iter().map(|x| *c as f64 * x).collect(),
                Op::AddScalar(a, c) => vals[*a].iter().map(|x| x + *c as f64).collect(),
                Op::RsubScalar(a, c) => vals[*a].iter().map(|x| *c as f64 - x).collect(),
                Op::Recip(a) => vals[*a].iter().map(|x| 1.0 / x).collect(),
                Op::Sqrt(a) => vals[*a].iter().map(|x| x.sqrt()).collect(),
                Op::Square(a) => vals[*a].iter().map(|x| x * x).collect(),
                Op::Ln(a) => vals[*a].iter().map(|x| x.ln()).collect(),
                Op::ClampMin(a, c) => vals[*a].iter().map(|x| x.max(*c as f64)).collect(),
                Op::ClampMax(a, c) => vals[*a].iter().map(|x| x.min(*c as f64)).collect(),
                Op::MatMul(a, b) => {
                    let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                    let mut out = vec![0.0; sa[0] * sb[1]];
                    kernels::matmul(&vals[*a], &vals[*b], sa[0], sa[1], sb[1], &mut out);
                    out
                }
                Op::MatMulBt(a, b) => {
                    let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                    let mut out = vec![0.0; sa[0] * sb[0]];
                    kernels::matmul_bt(&vals[*a], &vals[*b], sa[0], sa[1], sb[0], &mut out);
                    out
                }
                Op::AddRowVec(a, v) => {
                    let cols = self.value(*v).len();
                    let mut out = vals[*a].clone();
                    kernels::add_row_vec(&mut out, &vals[*v], cols);
                    out
                }
                Op::MulScalar(a, s) => {
                    let sv = vals[*s][0];
                    vals[*a].iter().map(|x| x * sv).collect()
                }
                Op::Conv1d { x, w, b, pad } => {
                    let (sx, sw) = (self.value(*x).shape(), self.value(*w).shape());
                    let (bs, ci, l, co, k) = (sx[0], sx[1], sx[2], sw[0], sw[2]);
                    let mut out = vec![0.0; bs * co * l];
                    kernels::conv1d(&vals[*x], &vals[*w], &vals[*b], bs, ci, l, co, k, *pad, &mut out);
                    out
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    layout,
                    eps,
                    stats,
                } => {
                    let (mean, var) = match stats {
                        BnStats::Batch { .. } => kernels::bn_batch_stats(&vals[*x], *layout),
                        BnStats::Fixed { mean, var } => (
                            mean.iter().map(|&v| v as f64).collect(),
                            var.iter().map(|&v| v as f64).collect(),
                        ),
                    };
                    let mut out = vec![0.0; vals[*x].len()];
                    kernels::bn_normalize(
                        &vals[*x],
                        &mean,
                        &var,
                        &vals[*gamma],
                        &vals[*beta],
                        *eps as f64,
                        *layout,
                        &mut out,
                    );
                    out
                }
                Op::Relu(a) => vals[*a].iter().map(|x| x.max(0.0)).collect(),
                Op::LeakyRelu(a, slope) => {
                    let s = *slope as f64;
                    vals[*a]
                        .iter()
                        .map(|&x| if x > 0.0 { x } else { s * x })
                        .collect()
                }
                Op::Tanh(a) => vals[*a].iter().map(|x| x.tanh()).collect(),
                Op::Sigmoid(a) => vals[*a].iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect(),
                Op::SumAll(a) => vec![vals[*a].iter().sum()],
                Op::MeanAll(a) => vec![vals[*a].iter().sum::<f64>() / vals[*a].len() as f64],
                Op::RowSum(a) => {
                    let cols = self.value(*a).shape()[1];
                    vals[*a].chunks(cols).map(|c| c.iter().sum()).collect()
                }
                Op::Reshape(a) => vals[*a].clone(),
                Op::Dwt1(a) => {
                    let s = self.value(*a).shape();
                    let (c, l) = (s[s.len() - 2], s[s.len() - 1]);
                    let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
                    let mut out = vec![0.0; vals[*a].len()];
                    kernels::dwt1(&vals[*a], groups, c, l, &mut out);
                    out
                }
                Op::Iwt1(a) => {
                    let s = self.value(*a).shape();
                    let (c2, h) = (s[s.len() - 2], s[s.len() - 1]);
                    let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
                    let mut out = vec![0.0; vals[*a].len()];
                    kernels::iwt1(&vals[*a], groups, c2, h, &mut out);
                    out
                }
            };
            vals.push(v);
        }
        vals
    }
}

fn map(t: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect()).unwrap()
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Tensor {
    Tensor::new(
        a.shape().to_vec(),
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
    )
    .unwrap()
}

fn zip64(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_derivative_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), true);
        let y = tape.tanh(x);
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 1.0);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(2.0), true);
        let c = tape.constant(Tensor::scalar(5.0));
        let y = tape.mul(x, c);
        let grads = tape.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 5.0);
        // c is a leaf: it accumulates a gradient but x does not depend on it
        let z = tape.constant(Tensor::scalar(1.0));
        assert!(grads.get(z).is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(vec![2, 2]), true);
        let y = tape.add(x, x);
        assert!(matches!(tape.backward(y), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn gradient_linearity() {
        // grad(a·L1 + b·L2) == a·grad(L1) + b·grad(L2)
        let build = |coeff1: f32, coeff2: f32| -> (f32, f32) {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::new(vec![2], vec![0.3, -0.7]).unwrap(), true);
            let l1 = {
                let s = tape.square(x);
                tape.sum_all(s)
            };
            let l2 = {
                let t = tape.tanh(x);
                tape.mean_all(t)
            };
            let a = tape.scale(l1, coeff1);
            let b = tape.scale(l2, coeff2);
            let loss = tape.add(a, b);
            let g = tape.backward(loss).unwrap();
            let gx = g.get(x).unwrap();
            (gx.data()[0], gx.data()[1])
        };
        let (g10, g11) = build(1.0, 0.0);
        let (g20, g21) = build(0.0, 1.0);
        let (gc0, gc1) = build(2.0, 3.0);
        assert!((gc0 - (2.0 * g10 + 3.0 * g20)).abs() < 1e-6);
        assert!((gc1 - (2.0 * g11 + 3.0 * g21)).abs() < 1e-6);
    }

    #[test]
    fn shadow_eval_matches_forward() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![2, 2], vec![0.5, -1.0, 2.0, 0.25]).unwrap(), true);
        let s = tape.sigmoid(x);
        let m = tape.mean_all(s);
        let vals = tape.eval_f64(&[]);
        assert!((vals[m][0] - tape.value(m).item() as f64).abs() < 1e-6);
    }
}
