//! Single-layer LSTM over scalar sequences, with exact gradients.
//!
//! The cell follows the standard gate equations
//!
//! ```text
//! i = sigmoid(Wxi x + Whi h' + bi)      f = sigmoid(Wxf x + Whf h' + bf)
//! o = sigmoid(Wxo x + Who h' + bo)      g = tanh   (Wxg x + Whg h' + bg)
//! c = f * c' + i * g                    h = o * tanh(c)
//! ```
//!
//! followed by an affine scalar head `y = w . h_T + b`. Parameters live in
//! one flat vector so the optimizer and the finite-difference checks can
//! treat the model as a plain function of `theta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate order inside the flat parameter vector.
const GATES: usize = 4;
const GATE_INPUT: usize = 0;
const GATE_FORGET: usize = 1;
const GATE_OUTPUT: usize = 2;
const GATE_CELL: usize = 3;

/// Flat-parameter LSTM with a scalar input per step and a scalar affine
/// head. Layout: input weights (4 gates x h), recurrent weights
/// (4 gates x h x h, row-major), gate biases (4 gates x h), head weights
/// (h), head bias (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LstmParamsRepr", into = "LstmParamsRepr")]
pub struct LstmParams {
    input_dim: usize,
    hidden: usize,
    theta: Vec<f64>,
}

/// Self-describing serialized form: shapes plus per-block row-major arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LstmParamsRepr {
    input_dim: usize,
    hidden: usize,
    input_weights: Vec<f64>,
    recurrent_weights: Vec<f64>,
    gate_biases: Vec<f64>,
    head_weights: Vec<f64>,
    head_bias: f64,
}

impl From<LstmParams> for LstmParamsRepr {
    fn from(p: LstmParams) -> Self {
        let h = p.hidden;
        LstmParamsRepr {
            input_dim: p.input_dim,
            hidden: h,
            input_weights: p.theta[..GATES * h].to_vec(),
            recurrent_weights: p.theta[GATES * h..GATES * h + GATES * h * h].to_vec(),
            gate_biases: p.theta
                [GATES * h + GATES * h * h..GATES * h + GATES * h * h + GATES * h]
                .to_vec(),
            head_weights: p.theta[GATES * h + GATES * h * h + GATES * h
                ..GATES * h + GATES * h * h + GATES * h + h]
                .to_vec(),
            head_bias: *p.theta.last().expect("non-empty parameter vector"),
        }
    }
}

impl From<LstmParamsRepr> for LstmParams {
    fn from(r: LstmParamsRepr) -> Self {
        let mut theta = Vec::with_capacity(LstmParams::param_count(r.hidden));
        theta.extend(&r.input_weights);
        theta.extend(&r.recurrent_weights);
        theta.extend(&r.gate_biases);
        theta.extend(&r.head_weights);
        theta.push(r.head_bias);
        LstmParams {
            input_dim: r.input_dim,
            hidden: r.hidden,
            theta,
        }
    }
}

impl LstmParams {
    /// Total parameter count for hidden size `h` (scalar input).
    pub fn param_count(h: usize) -> usize {
        GATES * h + GATES * h * h + GATES * h + h + 1
    }

    /// All-zero parameters.
    pub fn zeros(hidden: usize) -> Self {
        assert!(hidden > 0, "hidden size must be positive");
        LstmParams {
            input_dim: 1,
            hidden,
            theta: vec![0.0; Self::param_count(hidden)],
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn head_w(&self, j: usize) -> f64 {
        let h = self.hidden;
        self.theta[GATES * h + GATES * h * h + GATES * h + j]
    }

    fn head_b(&self) -> f64 {
        *self.theta.last().expect("non-empty parameter vector")
    }

    /// Offset of the forget-gate bias block; used to seed it to 1.
    pub fn forget_bias_range(hidden: usize) -> std::ops::Range<usize> {
        let base = GATES * hidden + GATES * hidden * hidden + GATE_FORGET * hidden;
        base..base + hidden
    }

    fn off_wx(gate: usize, h: usize, j: usize) -> usize {
        gate * h + j
    }

    fn off_bias(gate: usize, h: usize, j: usize) -> usize {
        GATES * h + GATES * h * h + gate * h + j
    }

    fn off_head_w(h: usize, j: usize) -> usize {
        GATES * h + GATES * h * h + GATES * h + j
    }

    fn off_head_b(h: usize) -> usize {
        Self::param_count(h) - 1
    }

    fn check_finite(&self) -> Result<()> {
        if self.theta.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFiniteParams)
        }
    }
}

/// Per-step activations retained for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCaches {
    inputs: Vec<f64>,
    /// h_0..h_T (length T+1).
    hidden_states: Vec<Vec<f64>>,
    /// c_0..c_T (length T+1).
    cell_states: Vec<Vec<f64>>,
    gates_i: Vec<Vec<f64>>,
    gates_f: Vec<Vec<f64>>,
    gates_o: Vec<Vec<f64>>,
    gates_g: Vec<Vec<f64>>,
    tanh_c: Vec<Vec<f64>>,
    prediction: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Runs the window through the cell and head. The caches suffice to compute
/// exact gradients of the squared-error loss.
pub fn lstm_forward(params: &LstmParams, window: &[f64]) -> Result<(f64, LstmCaches)> {
    if window.is_empty() {
        return Err(Error::bad_input("window must contain at least one step"));
    }
    params.check_finite()?;

    let h = params.hidden;
    let steps = window.len();
    let theta = &params.theta;
    let wx = &theta[..GATES * h];
    let wh = &theta[GATES * h..GATES * h + GATES * h * h];
    let bias = &theta[GATES * h + GATES * h * h..GATES * h + GATES * h * h + GATES * h];

    let mut caches = LstmCaches {
        inputs: window.to_vec(),
        hidden_states: Vec::with_capacity(steps + 1),
        cell_states: Vec::with_capacity(steps + 1),
        gates_i: Vec::with_capacity(steps),
        gates_f: Vec::with_capacity(steps),
        gates_o: Vec::with_capacity(steps),
        gates_g: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        prediction: 0.0,
    };
    caches.hidden_states.push(vec![0.0; h]);
    caches.cell_states.push(vec![0.0; h]);

    let mut pre = vec![0.0; GATES * h];
    for &x in window {
        let h_prev = caches.hidden_states.last().expect("seeded state");
        let c_prev = caches.cell_states.last().expect("seeded state");

        for gate in 0..GATES {
            for j in 0..h {
                let row = &wh[gate * h * h + j * h..gate * h * h + (j + 1) * h];
                let mut acc = wx[gate * h + j] * x + bias[gate * h + j];
                for (w, hp) in row.iter().zip(h_prev) {
                    acc += w * hp;
                }
                pre[gate * h + j] = acc;
            }
        }

        let mut gate_i = vec![0.0; h];
        let mut gate_f = vec![0.0; h];
        let mut gate_o = vec![0.0; h];
        let mut gate_g = vec![0.0; h];
        let mut cell = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        for j in 0..h {
            gate_i[j] = sigmoid(pre[GATE_INPUT * h + j]);
            gate_f[j] = sigmoid(pre[GATE_FORGET * h + j]);
            gate_o[j] = sigmoid(pre[GATE_OUTPUT * h + j]);
            gate_g[j] = pre[GATE_CELL * h + j].tanh();
            cell[j] = gate_f[j] * c_prev[j] + gate_i[j] * gate_g[j];
            tanh_c[j] = cell[j].tanh();
            hidden[j] = gate_o[j] * tanh_c[j];
        }

        caches.gates_i.push(gate_i);
        caches.gates_f.push(gate_f);
        caches.gates_o.push(gate_o);
        caches.gates_g.push(gate_g);
        caches.tanh_c.push(tanh_c);
        caches.cell_states.push(cell);
        caches.hidden_states.push(hidden);
    }

    let h_final = caches.hidden_states.last().expect("final state");
    let head_w =
        &theta[GATES * h + GATES * h * h + GATES * h..GATES * h + GATES * h * h + GATES * h + h];
    let mut prediction = params.head_b();
    for (w, value) in head_w.iter().zip(h_final) {
        prediction += w * value;
    }
    caches.prediction = prediction;
    Ok((prediction, caches))
}

/// Exact gradient of `(prediction - target)^2` with respect to every
/// parameter, via backpropagation through time.
pub fn lstm_backward(params: &LstmParams, caches: &LstmCaches, target: f64) -> Vec<f64> {
    let h = params.hidden;
    let steps = caches.inputs.len();
    let mut grad = vec![0.0; params.theta.len()];
    let wh = &params.theta[GATES * h..GATES * h + GATES * h * h];

    let d_pred = 2.0 * (caches.prediction - target);
    let h_final = &caches.hidden_states[steps];
    for j in 0..h {
        grad[LstmParams::off_head_w(h, j)] += d_pred * h_final[j];
    }
    grad[LstmParams::off_head_b(h)] += d_pred;

    let mut d_hidden: Vec<f64> = (0..h).map(|j| d_pred * params.head_w(j)).collect();
    let mut d_cell = vec![0.0; h];

    for t in (0..steps).rev() {
        let x = caches.inputs[t];
        let h_prev = &caches.hidden_states[t];
        let c_prev = &caches.cell_states[t];
        let gate_i = &caches.gates_i[t];
        let gate_f = &caches.gates_f[t];
        let gate_o = &caches.gates_o[t];
        let gate_g = &caches.gates_g[t];
        let tanh_c = &caches.tanh_c[t];

        let mut d_hidden_prev = vec![0.0; h];
        let mut d_cell_prev = vec![0.0; h];

        for j in 0..h {
            let d_o = d_hidden[j] * tanh_c[j];
            let dc = d_cell[j] + d_hidden[j] * gate_o[j] * (1.0 - tanh_c[j] * tanh_c[j]);
            let d_i = dc * gate_g[j];
            let d_g = dc * gate_i[j];
            let d_f = dc * c_prev[j];
            d_cell_prev[j] = dc * gate_f[j];

            let d_pre = [
                d_i * gate_i[j] * (1.0 - gate_i[j]),
                d_f * gate_f[j] * (1.0 - gate_f[j]),
                d_o * gate_o[j] * (1.0 - gate_o[j]),
                d_g * (1.0 - gate_g[j] * gate_g[j]),
            ];

            for (gate, d) in d_pre.iter().enumerate() {
                grad[LstmParams::off_wx(gate, h, j)] += d * x;
                grad[LstmParams::off_bias(gate, h, j)] += d;
                let row_base = gate * h * h + j * h;
                let grad_row = &mut grad[GATES * h + row_base..GATES * h + row_base + h];
                for (g, hp) in grad_row.iter_mut().zip(h_prev) {
                    *g += d * hp;
                }
                for (dh, w) in d_hidden_prev.iter_mut().zip(&wh[row_base..row_base + h]) {
                    *dh += w * d;
                }
            }
        }

        d_hidden = d_hidden_prev;
        d_cell = d_cell_prev;
    }

    grad
}

/// Squared-error loss of one window against its target.
pub fn lstm_loss(params: &LstmParams, window: &[f64], target: f64) -> Result<f64> {
    let (prediction, _) = lstm_forward(params, window)?;
    let residual = prediction - target;
    Ok(residual * residual)
}
