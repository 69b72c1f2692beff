//! A minimal differentiable computation core: named parameter tensors, a
//! dynamically recorded operation tape with reverse-mode gradients, LSTM
//! and BiLSTM layers, a two-layer perceptron, and the Adam optimizer.
//!
//! Everything is 64-bit floating point; the parser builds a different
//! computation per transition sequence, so values are computed eagerly as
//! operations are recorded and gradients replay the tape backwards.

mod adam;
mod lstm;
mod mlp;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use lstm::{bilstm_encode, lstm_forward, BiLstmStack, LstmParams};
pub use mlp::{mlp_forward, MlpParams};
pub use tape::{NodeId, Tape};
pub use tensor::{xavier_uniform, ParamId, ParamStore, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("BiLSTM stack must have at least one layer")]
    EmptyStack,
}
