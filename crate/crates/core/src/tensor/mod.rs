//! Dense tensor engine: reverse-mode autodiff, the layer set used by this
//! crate's networks, Adam, orthonormal Haar DWT/IWT and checkpointing.

mod adam;
mod checkpoint;
pub mod gradcheck;
pub mod kernels;
mod nn;
mod penalty;
mod tape;
mod tensor_impl;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use kernels::BnLayout;
pub use nn::{forward, Act, Binding, Layer, LayerSpec, Mode, Network, BN_EPS, BN_MOMENTUM};
pub use penalty::{critic_input_gradient, grad_penalty_grad, penalty_from_grad};
pub use tape::{BnStats, Grads, NodeId, Op, Tape};
pub use tensor_impl::{Tensor, TensorError};

/// Haar analysis on a plain tensor: `[.., c, l] -> [.., 2c, l/2]`.
pub fn dwt1(x: &Tensor) -> Result<Tensor, TensorError> {
    let s = x.shape();
    if s.len() < 2 || s[s.len() - 1] % 2 != 0 {
        return Err(TensorError::ShapeMismatch {
            context: "dwt1".into(),
            expected: "[.., c, even l]".into(),
            got: format!("{s:?}"),
        });
    }
    let (c, l) = (s[s.len() - 2], s[s.len() - 1]);
    let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
    let mut out_shape = s.to_vec();
    let d = out_shape.len();
    out_shape[d - 2] = 2 * c;
    out_shape[d - 1] = l / 2;
    let mut out = Tensor::zeros(out_shape);
    kernels::dwt1(x.data(), groups, c, l, out.data_mut());
    Ok(out)
}

/// Exact inverse of [`dwt1`]: `[.., 2c, l/2] -> [.., c, l]`.
pub fn iwt1(coeffs: &Tensor) -> Result<Tensor, TensorError> {
    let s = coeffs.shape();
    if s.len() < 2 || s[s.len() - 2] % 2 != 0 {
        return Err(TensorError::ShapeMismatch {
            context: "iwt1".into(),
            expected: "[.., 2c, l/2]".into(),
            got: format!("{s:?}"),
        });
    }
    let (c2, h) = (s[s.len() - 2], s[s.len() - 1]);
    let groups = s[..s.len() - 2].iter().product::<usize>().max(1);
    let mut out_shape = s.to_vec();
    let d = out_shape.len();
    out_shape[d - 2] = c2 / 2;
    out_shape[d - 1] = h * 2;
    let mut out = Tensor::zeros(out_shape);
    kernels::iwt1(coeffs.data(), groups, c2, h, out.data_mut());
    Ok(out)
}
