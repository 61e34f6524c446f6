//! Class-centric machine unlearning on a small, self-contained training core.
//!
//! The crate trains multilayer-perceptron classifiers, removes whole classes
//! from them using only the data of the classes being forgotten, and measures
//! the result. The main method distills the frozen original model into the
//! student after masking the forgotten class out of the teacher's logits, so
//! the target assigns zero probability to that class while keeping the
//! teacher's relative preferences among all other classes. Re-label and
//! gradient-ascent baselines, ablation targets, and the usual accuracy and
//! membership-inference metrics are provided alongside.
//!
//! Module map:
//!
//! * [`numcore`]: tensors, softmax, KL divergence, a reverse-mode tape, SGD
//! * [`model`]: MLP classifier with deterministic initialization
//! * [`data`]: synthetic blobs, IDX files, forget/remain splits, batching
//! * [`losses`]: target distributions and loss constructions
//! * [`engine`]: pretraining, retraining, unlearning, checkpoints
//! * [`eval`]: accuracies, H-Mean, membership inference, reports
//! * [`verify`]: randomized machine checks of the loss identities

pub mod data;
pub mod engine;
pub mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod numcore;
pub mod verify;

pub use error::{Error, Result};
