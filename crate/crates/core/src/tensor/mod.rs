//! Dense matrices, reverse-mode differentiation and optimizers.

mod matrix;
mod optim;
mod tape;

pub use matrix::{argmax, dot, sigmoid, Matrix};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tape::{Elementwise, Gradients, Tape, Var, LOG_EPS};
