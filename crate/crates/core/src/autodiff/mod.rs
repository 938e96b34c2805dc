//! Reverse-mode automatic differentiation over dense `f64` matrices.

mod adam;
mod checkpoint;
mod kernels;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tape::{sigmoid, Tape, Var, PROB_CLAMP};
pub use tensor::Tensor;
