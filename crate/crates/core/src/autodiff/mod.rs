//! Dense reverse-mode automatic differentiation over `f32` tensors.
//!
//! A [`Tape`] records each forward operation together with its output value;
//! [`Tape::backward`] sweeps the tape once in reverse and routes parameter
//! gradients into the owning [`ParameterStore`].

mod store;
mod tape;
mod tensor;

pub use store::{Adam, ParamEntry, ParameterStore};
pub use tape::{Gradients, NodeId, OpKind, ParamRef, Tape};
pub use tensor::Tensor;
