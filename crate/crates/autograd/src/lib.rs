//! Small dense-tensor autodiff layer used to train the sequence models.
//!
//! All arithmetic is `f64`. A [`Tape`] is rebuilt for every training step:
//! inputs are registered with [`Tape::param`] or [`Tape::constant`], the
//! forward pass appends nodes, and [`Tape::backward`] returns gradients for
//! every leaf. [`Adam`] applies the update.

mod adam;
pub mod check;
mod error;
mod tape;
pub mod tensor;

pub use adam::Adam;
pub use error::{AutogradError, Result};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
