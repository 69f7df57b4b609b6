//! Minimal neural-network toolkit: parameters, a reverse-mode tape, stacked
//! GRU cells and Adam. Everything is `f64`.

mod adam;
mod gru;
mod params;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gru::{gru_forward, GruLayer, GruStack};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("affine map needs at least one term or a bias")]
    Empty,
    #[error("target distribution sums to {0}, expected 1")]
    TargetNotNormalized(f64),
    #[error("loss must be a scalar, found length {0}")]
    NotScalar(usize),
    #[error("tape already back-propagated; record a new forward pass")]
    AlreadyBackpropagated,
    #[error("non-finite gradient for parameter `{0}`; step aborted")]
    NonFiniteGradient(alloc::string::String),
}

/// Cross-entropy `H(target, softmax(logits))` recorded on `tape`.
pub fn softmax_cross_entropy(tape: &mut Tape<'_>, logits: Var, target: alloc::vec::Vec<f64>) -> Result<Var, NnError> {
    tape.softmax_cross_entropy(logits, target)
}
