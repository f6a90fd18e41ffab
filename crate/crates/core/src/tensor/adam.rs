//! Bias-corrected Adam.

use super::tensor_impl::Tensor;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(lr: f32, beta1: f32, beta2: f32, param_shapes: &[Vec<usize>]) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: param_shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn for_params(lr: f32, beta1: f32, beta2: f32, params: &[&Tensor]) -> Self {
        let shapes: Vec<Vec<usize>> = params.iter().map(|p| p.shape().to_vec()).collect();
        Self::new(lr, beta1, beta2, &shapes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `grads[i] = None` is treated as a zero gradient (the moment
    /// estimates still decay).
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<Tensor>]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter count changed");
        assert_eq!(params.len(), grads.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), (v, g)) in params
            .iter_mut()
            .zip(&mut self.m)
            .zip(self.v.iter_mut().zip(grads))
        {
            let zero;
            let g = match g {
                Some(t) => t,
                None => {
                    zero = Tensor::zeros(p.shape().to_vec());
                    &zero
                }
            };
            debug_assert_eq!(g.shape(), p.shape(), "adam: gradient shape mismatch");
            for i in 0..p.len() {
                let gi = g.data()[i];
                let mi = self.beta1 * m.data()[i] + (1.0 - self.beta1) * gi;
                let vi = self.beta2 * v.data()[i] + (1.0 - self.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                p.data_mut()[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
