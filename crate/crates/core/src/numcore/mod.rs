//! Dense and sparse matrices plus a small reverse-mode autodiff tape.
//!
//! Storage is generic over [`Scalar`] (`f32` for training, `f64` for gradient
//! checks). Reductions (matrix products, batch statistics, loss means) always
//! accumulate in `f64`.

mod adam;
mod checkpoint;
mod dense;
mod scalar;
mod sparse;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_digest, decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint,
    NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dense::DenseMatrix;
pub use scalar::Scalar;
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
