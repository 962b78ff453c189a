//! Minimal dense reverse-mode differentiation.
//!
//! A [`Tape`] records primitives as they execute; [`Tape::backward`] walks the
//! record in reverse once and returns [`Gradients`]. Only the primitives the
//! completion network needs are provided, with row broadcasting as the only
//! broadcasting rule.

mod adam;
mod gradcheck;
mod kernels;
mod scalar;
mod suite;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use scalar::Scalar;
pub use suite::{primitive_suite, CheckEntry, PRIMITIVE_TOLERANCE};
pub use tape::{BnStats, Gradients, Tape, Var};
pub use tensor::Tensor;
