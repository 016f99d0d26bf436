//! Minimal dense reverse-mode automatic differentiation.
//!
//! All tensors are row-major `rows × cols` matrices of `f64`; vectors are
//! `1 × n` and scalars `1 × 1`. Operations are recorded on a [`Tape`] and
//! differentiated by [`Tape::backward`].

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
