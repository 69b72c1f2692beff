//! The two-layer perceptron scoring head: `W2 · tanh(W · h + b) + b2`.

use rand::Rng;

use super::tape::{NodeId, Tape};
use super::tensor::{xavier_uniform, ParamId, ParamStore, Tensor};
use super::NeuralError;

#[derive(Debug, Clone)]
pub struct MlpParams {
    pub w: ParamId,
    pub b: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
}

impl MlpParams {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> MlpParams {
        let w = store.add(
            &format!("{prefix}.w"),
            xavier_uniform(hidden_dim, input_dim, rng),
        );
        let b = store.add(&format!("{prefix}.b"), Tensor::zeros(&[hidden_dim]));
        let w2 = store.add(
            &format!("{prefix}.w2"),
            xavier_uniform(output_dim, hidden_dim, rng),
        );
        let b2 = store.add(&format!("{prefix}.b2"), Tensor::zeros(&[output_dim]));
        MlpParams {
            w,
            b,
            w2,
            b2,
            input_dim,
            hidden_dim,
            output_dim,
        }
    }
}

/// Scores `h`: no nonlinearity after the output layer.
pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    params: &MlpParams,
    h: NodeId,
) -> Result<NodeId, NeuralError> {
    let len = tape.value(h).len();
    if len != params.input_dim {
        return Err(NeuralError::DimensionMismatch {
            what: "MLP input".to_string(),
            expected: params.input_dim,
            found: len,
        });
    }
    let pre = tape.matvec(store, params.w, h);
    let pre = tape.add_bias(store, pre, params.b);
    let hidden = tape.tanh(pre);
    let out = tape.matvec(store, params.w2, hidden);
    Ok(tape.add_bias(store, out, params.b2))
}
