//! The advice-gated policy network and its training machinery.
//!
//! ```text
//! h1 = tanh(W1 s + b1)
//! ŷ  = sigmoid(W2 h1 + b2) ∘ advice
//! y  = ŷ / Σ ŷ
//! ```
//!
//! Gradients are hand-derived for this fixed architecture; there is no
//! general autodiff. All arithmetic is `f64`.

mod adam;
mod checkpoint;
mod net;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use net::{
    accumulate_gradient, accumulate_step, episode_gradient, ForwardTrace, Gradients, NetShape, Params, PolicyNet,
    PROB_FLOOR,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite {what} at index {index}")]
    NonFiniteInput { what: &'static str, index: usize },
    #[error("advice must be non-negative with positive mass")]
    InvalidAdvice,
    #[error("non-finite gradient for parameter {0}")]
    NonFiniteGradient(String),
    #[error("update produced a non-finite value for parameter {0}")]
    NonFiniteParameter(String),
    #[error("shape mismatch between network and {0}")]
    ShapeMismatch(&'static str),
    #[error("trace and returns differ in length ({trace} vs {returns})")]
    ReturnsLength { trace: usize, returns: usize },
    #[error("action {action} out of range for {actions} actions")]
    Action { action: usize, actions: usize },
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error("checkpoint io: {0}")]
    Io(String),
}
