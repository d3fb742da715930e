//! Dense reverse-mode automatic differentiation for MLPs.
//!
//! Tapes record tensor-level ops; [`Tape::grad`] writes the backward pass
//! back onto the same tape so gradients can be differentiated again. That is
//! all the WGAN gradient penalty needs.

mod mlp;
mod tape;
mod tensor;

pub use mlp::{
    grad_penalty_grads, input_grad, param_grads, record_gradient_penalty, Activation, BoundMlp,
    Gradients, Init, Layer, Mlp,
};
pub use tape::{Op, Tape, Var};
pub use tensor::{add_row, matmul, Tensor};
