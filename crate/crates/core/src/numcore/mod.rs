//! Dense `f64` numerics: tensors, distributions, reverse-mode gradients and SGD.

mod gradcheck;
mod optim;
mod prob;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, GradCheck, REL_ERROR_FLOOR};
pub use optim::{sgd_step, Sgd};
pub use prob::{argmax, kl_divergence, softmax, ProbVector, LOG_EPS, MASS_TOL};
pub(crate) use prob::kl_terms;
pub use tape::{GradTape, Gradients, Var};
pub use tensor::{matmul, Tensor};
