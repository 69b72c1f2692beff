//! LSTM cells and stacked bidirectional encoding on the tape.

use rand::Rng;

use super::tape::{NodeId, Tape};
use super::tensor::{xavier_uniform, ParamId, ParamStore, Tensor};
use super::NeuralError;

/// Parameters of one LSTM direction: input weights, recurrent weights and
/// bias per gate (input, forget, output, candidate).
#[derive(Debug, Clone)]
pub struct LstmParams {
    pub wi: ParamId,
    pub ui: ParamId,
    pub bi: ParamId,
    pub wf: ParamId,
    pub uf: ParamId,
    pub bf: ParamId,
    pub wo: ParamId,
    pub uo: ParamId,
    pub bo: ParamId,
    pub wg: ParamId,
    pub ug: ParamId,
    pub bg: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    /// Registers freshly initialized parameters under `prefix.*`.
    /// Weights are Glorot-uniform, biases zero except the forget gate at +1.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> LstmParams {
        let w = |store: &mut ParamStore, gate: &str, rng: &mut R| {
            store.add(
                &format!("{prefix}.w{gate}"),
                xavier_uniform(hidden_dim, input_dim, rng),
            )
        };
        let u = |store: &mut ParamStore, gate: &str, rng: &mut R| {
            store.add(
                &format!("{prefix}.u{gate}"),
                xavier_uniform(hidden_dim, hidden_dim, rng),
            )
        };
        let b = |store: &mut ParamStore, gate: &str, fill: f64| {
            store.add(
                &format!("{prefix}.b{gate}"),
                Tensor::from_values(&[hidden_dim], vec![fill; hidden_dim]),
            )
        };
        let wi = w(store, "i", rng);
        let ui = u(store, "i", rng);
        let bi = b(store, "i", 0.0);
        let wf = w(store, "f", rng);
        let uf = u(store, "f", rng);
        let bf = b(store, "f", 1.0);
        let wo = w(store, "o", rng);
        let uo = u(store, "o", rng);
        let bo = b(store, "o", 0.0);
        let wg = w(store, "g", rng);
        let ug = u(store, "g", rng);
        let bg = b(store, "g", 0.0);
        LstmParams {
            wi,
            ui,
            bi,
            wf,
            uf,
            bf,
            wo,
            uo,
            bo,
            wg,
            ug,
            bg,
            input_dim,
            hidden_dim,
        }
    }
}

/// Runs one LSTM direction over the sequence with zero initial state.
///
/// With `reverse` the sequence is processed right to left and the outputs
/// are returned aligned to the original positions.
pub fn lstm_forward(
    tape: &mut Tape,
    store: &ParamStore,
    params: &LstmParams,
    inputs: &[NodeId],
    reverse: bool,
) -> Result<Vec<NodeId>, NeuralError> {
    for &x in inputs {
        let len = tape.value(x).len();
        if len != params.input_dim {
            return Err(NeuralError::DimensionMismatch {
                what: "LSTM input".to_string(),
                expected: params.input_dim,
                found: len,
            });
        }
    }
    let order: Vec<usize> = if reverse {
        (0..inputs.len()).rev().collect()
    } else {
        (0..inputs.len()).collect()
    };
    let mut outputs = vec![None; inputs.len()];
    let mut state: Option<(NodeId, NodeId)> = None; // (h, c)
    for pos in order {
        let x = inputs[pos];
        let gate = |tape: &mut Tape, w: ParamId, u: ParamId, b: ParamId, prev: Option<NodeId>| {
            let wx = tape.matvec(store, w, x);
            let pre = match prev {
                Some(h) => {
                    let uh = tape.matvec(store, u, h);
                    tape.add(wx, uh)
                }
                // Zero initial state: the recurrent term vanishes along
                // with its gradient, so it is simply skipped.
                None => wx,
            };
            tape.add_bias(store, pre, b)
        };
        let h_prev = state.map(|(h, _)| h);
        let i_pre = gate(tape, params.wi, params.ui, params.bi, h_prev);
        let i = tape.sigmoid(i_pre);
        let f_pre = gate(tape, params.wf, params.uf, params.bf, h_prev);
        let f = tape.sigmoid(f_pre);
        let o_pre = gate(tape, params.wo, params.uo, params.bo, h_prev);
        let o = tape.sigmoid(o_pre);
        let g_pre = gate(tape, params.wg, params.ug, params.bg, h_prev);
        let g = tape.tanh(g_pre);
        let c = match state {
            Some((_, c_prev)) => {
                let keep = tape.mul(f, c_prev);
                let write = tape.mul(i, g);
                tape.add(keep, write)
            }
            None => tape.mul(i, g),
        };
        let c_squashed = tape.tanh(c);
        let h = tape.mul(o, c_squashed);
        outputs[pos] = Some(h);
        state = Some((h, c));
    }
    Ok(outputs.into_iter().map(|h| h.unwrap()).collect())
}

/// A stack of bidirectional layers; layer `m + 1` consumes the
/// concatenated forward/backward outputs of layer `m`.
#[derive(Debug, Clone)]
pub struct BiLstmStack {
    pub layers: Vec<(LstmParams, LstmParams)>,
}

impl BiLstmStack {
    /// `output_dim` is the concatenated size, so each direction gets half.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        layers: usize,
        rng: &mut R,
    ) -> BiLstmStack {
        assert!(layers >= 1, "at least one BiLSTM layer");
        assert!(output_dim % 2 == 0, "BiLSTM output size must be even");
        let hidden = output_dim / 2;
        let mut stack = Vec::new();
        let mut dim = input_dim;
        for layer in 0..layers {
            let fwd = LstmParams::init(store, &format!("{prefix}.l{layer}.fwd"), dim, hidden, rng);
            let bwd = LstmParams::init(store, &format!("{prefix}.l{layer}.bwd"), dim, hidden, rng);
            stack.push((fwd, bwd));
            dim = output_dim;
        }
        BiLstmStack { layers: stack }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|(f, _)| 2 * f.hidden_dim).unwrap_or(0)
    }
}

/// Encodes a sequence with the full stack; returns the top-layer outputs,
/// one concatenated forward∘backward vector per position.
pub fn bilstm_encode(
    tape: &mut Tape,
    store: &ParamStore,
    stack: &BiLstmStack,
    inputs: &[NodeId],
) -> Result<Vec<NodeId>, NeuralError> {
    if stack.layers.is_empty() {
        return Err(NeuralError::EmptyStack);
    }
    let mut current: Vec<NodeId> = inputs.to_vec();
    for (fwd, bwd) in &stack.layers {
        let f_out = lstm_forward(tape, store, fwd, &current, false)?;
        let b_out = lstm_forward(tape, store, bwd, &current, true)?;
        current = f_out
            .into_iter()
            .zip(b_out)
            .map(|(f, b)| tape.concat(&[f, b]))
            .collect();
    }
    Ok(current)
}
