//! Dense tensors and a tape-based differentiation engine.
//!
//! Spatial derivatives are recorded on the tape so that losses built from
//! them can be differentiated with respect to parameters.

mod tape;
mod tensor;

pub use tape::{Pool, Tape, Var};
pub use tensor::Tensor;
