//! Minimal tensor type, tape-based reverse-mode differentiation, and Adam.

mod adam;
mod tape;
mod tensor;

pub use adam::Adam;
pub use tape::{log_sum_exp, sigmoid, softmax, Gradients, Tape, Var};
pub use tensor::Tensor;
