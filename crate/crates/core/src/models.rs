//! Three-layer dense networks with leaky hidden units.
//!
//! Each hidden unit mixes its previous state with the current ReLU
//! activation:
//!
//! ```text
//! H(n) = α·H(n−1) + (1−α)·ReLU(W_ih·I(n) + b_h)
//! ```
//!
//! with a per-unit `α`. A reset sets `α = 0` for that trial. Training uses a
//! gradient that treats `H(n−1)` as a constant: only the current trial's
//! branch, scaled by `(1−α)`, is differentiated.

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{check_dim, Error, Result};
use crate::metrics::{bce_loss, ce_loss, mse_loss};
use crate::numerics::{relu_grad, sigmoid, softmax, xavier_init, Matrix, Rng};
use crate::optim::ParamTensors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classifier,
    Autoencoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    /// Categorical CE for softmax outputs, summed binary CE for sigmoid.
    Ce,
}

/// What triggers a hidden-state reset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Gating {
    None,
    /// All units reset when the label differs from the previous trial's.
    LabelReset,
    /// Unit `j` resets when the inputs in `monitors[j]` jump by more than
    /// their average; an empty list never triggers.
    InputReset {
        monitors: Vec<Vec<usize>>,
    },
    /// All units reset every `every` trials.
    Periodic {
        every: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// `[input, hidden, output]`
    pub layer_dims: [usize; 3],
    pub task: Task,
    pub output_activation: OutputActivation,
    pub leak_alphas: Vec<f64>,
    pub gating: Gating,
    pub loss: Loss,
    pub use_bias: bool,
}

impl ModelSpec {
    pub fn classifier(input: usize, hidden: usize, classes: usize) -> Self {
        Self {
            layer_dims: [input, hidden, classes],
            task: Task::Classifier,
            output_activation: OutputActivation::Softmax,
            leak_alphas: vec![0.0; hidden],
            gating: Gating::None,
            loss: Loss::Mse,
            use_bias: true,
        }
    }

    pub fn autoencoder(input: usize, hidden: usize) -> Self {
        Self {
            layer_dims: [input, hidden, input],
            task: Task::Autoencoder,
            output_activation: OutputActivation::Sigmoid,
            leak_alphas: vec![0.0; hidden],
            gating: Gating::None,
            loss: Loss::Mse,
            use_bias: true,
        }
    }

    pub fn with_uniform_alpha(mut self, alpha: f64) -> Self {
        self.leak_alphas = vec![alpha; self.hidden_dim()];
        self
    }

    pub fn with_alphas(mut self, alphas: Vec<f64>) -> Self {
        self.leak_alphas = alphas;
        self
    }

    pub fn with_gating(mut self, gating: Gating) -> Self {
        self.gating = gating;
        self
    }

    pub fn with_loss(mut self, loss: Loss) -> Self {
        self.loss = loss;
        self
    }

    pub fn with_output(mut self, act: OutputActivation) -> Self {
        self.output_activation = act;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn hidden_dim(&self) -> usize {
        self.layer_dims[1]
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[2]
    }

    pub fn has_memory(&self) -> bool {
        self.leak_alphas.iter().any(|&a| a != 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.contains(&0) {
            return Err(Error::Config {
                field: "layer_dims".into(),
                message: format!("all dimensions must be >= 1, got {:?}", self.layer_dims),
            });
        }
        if self.leak_alphas.len() != self.hidden_dim() {
            return Err(Error::Config {
                field: "leak_alphas".into(),
                message: format!("{} values for {} hidden units", self.leak_alphas.len(), self.hidden_dim()),
            });
        }
        if let Some(a) = self.leak_alphas.iter().find(|a| !(0.0..1.0).contains(*a)) {
            return Err(Error::Config { field: "leak_alphas".into(), message: format!("{a} outside [0, 1)") });
        }
        if self.task == Task::Autoencoder && self.output_dim() != self.input_dim() {
            return Err(Error::Config {
                field: "layer_dims".into(),
                message: "autoencoder output dim must equal input dim".into(),
            });
        }
        match &self.gating {
            Gating::InputReset { monitors } => {
                if monitors.len() != self.hidden_dim() {
                    return Err(Error::Config {
                        field: "gating.monitors".into(),
                        message: format!("{} entries for {} hidden units", monitors.len(), self.hidden_dim()),
                    });
                }
                if let Some(&i) = monitors.iter().flatten().find(|&&i| i >= self.input_dim()) {
                    return Err(Error::Config {
                        field: "gating.monitors".into(),
                        message: format!("input index {i} beyond input dim {}", self.input_dim()),
                    });
                }
            }
            Gating::Periodic { every: 0 } => {
                return Err(Error::Config { field: "gating.every".into(), message: "period must be >= 1".into() })
            }
            _ => {}
        }
        Ok(())
    }

    /// Training target for a sample: one-hot label or the input itself.
    pub fn target(&self, input: &[f64], label: usize) -> Vec<f64> {
        match self.task {
            Task::Classifier => one_hot(label, self.output_dim()),
            Task::Autoencoder => input.to_vec(),
        }
    }

    pub fn activate_output(&self, pre: &[f64]) -> Vec<f64> {
        match self.output_activation {
            OutputActivation::Softmax => softmax(pre),
            OutputActivation::Sigmoid => sigmoid(pre),
        }
    }

    pub fn loss_and_grad(&self, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        loss_and_grad(self.loss, self.output_activation, output, target)
    }

    pub fn output_delta(&self, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        output_delta(self.loss, self.output_activation, output, target)
    }
}

/// Loss value and `∂loss/∂output`.
pub fn loss_and_grad(loss: Loss, act: OutputActivation, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    match (loss, act) {
        (Loss::Mse, _) => mse_loss(output, target),
        (Loss::Ce, OutputActivation::Softmax) => ce_loss(output, target),
        (Loss::Ce, OutputActivation::Sigmoid) => bce_loss(output, target),
    }
}

/// Loss value and `∂loss/∂(output pre-activation)`.
pub fn output_delta(loss: Loss, act: OutputActivation, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (value, g) = loss_and_grad(loss, act, output, target)?;
    let delta = match (loss, act) {
        // both CE pairings collapse to output − target
        (Loss::Ce, _) => output.iter().zip(target).map(|(o, t)| o - t).collect(),
        (Loss::Mse, OutputActivation::Sigmoid) => g.iter().zip(output).map(|(gi, s)| gi * s * (1.0 - s)).collect(),
        (Loss::Mse, OutputActivation::Softmax) => {
            let gs: f64 = g.iter().zip(output).map(|(gi, s)| gi * s).sum();
            g.iter().zip(output).map(|(gi, s)| s * (gi - gs)).collect()
        }
    };
    Ok((value, delta))
}

pub fn one_hot(label: usize, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[label] = 1.0;
    v
}

/// Weights, biases, and the persistent hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub w_ih: Matrix,
    pub b_h: Vec<f64>,
    pub w_ho: Matrix,
    pub b_o: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub trial_count: u64,
}

impl ModelState {
    /// Xavier weights, zero biases, zero hidden state.
    pub fn init(spec: &ModelSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let [i, h, o] = spec.layer_dims;
        Ok(Self {
            w_ih: xavier_init(rng, i, h)?,
            b_h: vec![0.0; h],
            w_ho: xavier_init(rng, h, o)?,
            b_o: vec![0.0; o],
            h_prev: vec![0.0; h],
            trial_count: 0,
        })
    }

    pub fn reset_hidden(&mut self) {
        self.h_prev.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.w_ih.is_finite()
            && self.w_ho.is_finite()
            && self.b_h.iter().chain(&self.b_o).chain(&self.h_prev).all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self, spec: &ModelSpec) -> Checkpoint {
        let mut c = Checkpoint::new("leaky", spec.layer_dims.to_vec());
        c.push("w_ih", self.w_ih.as_slice());
        c.push("b_h", &self.b_h);
        c.push("w_ho", self.w_ho.as_slice());
        c.push("b_o", &self.b_o);
        c.push("leak_alphas", &spec.leak_alphas);
        c
    }

    pub fn from_checkpoint(spec: &ModelSpec, c: &Checkpoint) -> Result<Self> {
        spec.validate()?;
        if c.kind != "leaky" || c.dims != spec.layer_dims {
            return Err(Error::invalid(format!(
                "checkpoint {} {:?} does not match spec dims {:?}",
                c.kind, c.dims, spec.layer_dims
            )));
        }
        let [i, h, o] = spec.layer_dims;
        Ok(Self {
            w_ih: Matrix::from_vec(h, i, c.get("w_ih")?.to_vec())?,
            b_h: c.get_len("b_h", h)?.to_vec(),
            w_ho: Matrix::from_vec(o, h, c.get("w_ho")?.to_vec())?,
            b_o: c.get_len("b_o", o)?.to_vec(),
            h_prev: vec![0.0; h],
            trial_count: 0,
        })
    }
}

impl ParamTensors for ModelState {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![("w_ih", self.w_ih.as_slice()), ("b_h", &self.b_h), ("w_ho", self.w_ho.as_slice()), ("b_o", &self.b_o)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_ih", self.w_ih.as_mut_slice()),
            ("b_h", &mut self.b_h),
            ("w_ho", self.w_ho.as_mut_slice()),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Gradients shaped like [`ModelState`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub w_ih: Matrix,
    pub b_h: Vec<f64>,
    pub w_ho: Matrix,
    pub b_o: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros(spec: &ModelSpec) -> Self {
        let [i, h, o] = spec.layer_dims;
        Self { w_ih: Matrix::zeros(h, i), b_h: vec![0.0; h], w_ho: Matrix::zeros(o, h), b_o: vec![0.0; o] }
    }
}

impl ParamTensors for ModelGrads {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![("w_ih", self.w_ih.as_slice()), ("b_h", &self.b_h), ("w_ho", self.w_ho.as_slice()), ("b_o", &self.b_o)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_ih", self.w_ih.as_mut_slice()),
            ("b_h", &mut self.b_h),
            ("w_ho", self.w_ho.as_mut_slice()),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Which hidden units drop their memory on this trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reset {
    Keep,
    All,
    Units(Vec<bool>),
}

impl Reset {
    #[inline]
    pub fn applies(&self, unit: usize) -> bool {
        match self {
            Reset::Keep => false,
            Reset::All => true,
            Reset::Units(u) => u[unit],
        }
    }
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `trial_count` of the state after this forward call.
    pub trial: u64,
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden_inst: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output_pre: Vec<f64>,
    pub output: Vec<f64>,
    pub effective_alpha: Vec<f64>,
}

/// One trial: mixes the hidden state, computes the output, and advances
/// `state.h_prev`.
pub fn forward(spec: &ModelSpec, state: &mut ModelState, input: &[f64], reset: &Reset) -> Result<ForwardTrace> {
    check_dim("forward input", spec.input_dim(), input.len())?;
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("input[{i}]")));
    }
    if let Reset::Units(u) = reset {
        check_dim("forward reset mask", spec.hidden_dim(), u.len())?;
    }
    let mut hidden_pre = state.w_ih.matvec(input);
    if spec.use_bias {
        hidden_pre.iter_mut().zip(&state.b_h).for_each(|(z, b)| *z += b);
    }
    let hidden_inst: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
    let effective_alpha: Vec<f64> =
        (0..spec.hidden_dim()).map(|j| if reset.applies(j) { 0.0 } else { spec.leak_alphas[j] }).collect();
    let hidden: Vec<f64> = (0..spec.hidden_dim())
        .map(|j| {
            let a = effective_alpha[j];
            if a == 0.0 {
                hidden_inst[j]
            } else {
                a * state.h_prev[j] + (1.0 - a) * hidden_inst[j]
            }
        })
        .collect();
    let mut output_pre = state.w_ho.matvec(&hidden);
    if spec.use_bias {
        output_pre.iter_mut().zip(&state.b_o).for_each(|(z, b)| *z += b);
    }
    let output = spec.activate_output(&output_pre);
    let h_prev = std::mem::replace(&mut state.h_prev, hidden.clone());
    state.trial_count += 1;
    Ok(ForwardTrace {
        trial: state.trial_count,
        input: input.to_vec(),
        h_prev,
        hidden_pre,
        hidden_inst,
        hidden,
        output_pre,
        output,
        effective_alpha,
    })
}

/// Gradient of the current trial's loss with `H(n−1)` held fixed. Returns
/// the loss and the gradients.
pub fn backward_leak_unaware(
    spec: &ModelSpec,
    state: &ModelState,
    trace: &ForwardTrace,
    target: &[f64],
) -> Result<(f64, ModelGrads)> {
    if trace.trial != state.trial_count {
        return Err(Error::ContractViolation(format!(
            "stale trace from trial {} applied at trial {}",
            trace.trial, state.trial_count
        )));
    }
    check_dim("backward target", spec.output_dim(), target.len())?;
    let (loss, delta_o) = spec.output_delta(&trace.output, target)?;
    let mut g = ModelGrads::zeros(spec);
    g.w_ho.add_outer(1.0, &delta_o, &trace.hidden);
    let d_hidden = state.w_ho.matvec_t(&delta_o);
    let delta_h: Vec<f64> = (0..spec.hidden_dim())
        .map(|j| d_hidden[j] * (1.0 - trace.effective_alpha[j]) * relu_grad(trace.hidden_pre[j]))
        .collect();
    g.w_ih.add_outer(1.0, &delta_h, &trace.input);
    if spec.use_bias {
        g.b_o = delta_o;
        g.b_h = delta_h;
    }
    Ok((loss, g))
}

/// `true` on the first trial or when the category changes.
pub fn label_gate(prev_label: Option<usize>, current_label: usize) -> bool {
    prev_label != Some(current_label)
}

/// Per unit: resets when the monitored inputs satisfy
/// `mean|I_t − I_{t−1}| > |mean (I_t + I_{t−1})/2|`. Units with no
/// monitored inputs never reset.
pub fn input_gate(prev_input: &[f64], current_input: &[f64], monitors: &[Vec<usize>]) -> Result<Vec<bool>> {
    check_dim("input_gate", prev_input.len(), current_input.len())?;
    monitors
        .iter()
        .map(|idx| {
            if idx.is_empty() {
                return Ok(false);
            }
            if let Some(&i) = idx.iter().find(|&&i| i >= current_input.len()) {
                return Err(Error::invalid(format!("monitored input {i} out of range")));
            }
            let n = idx.len() as f64;
            let diff = idx.iter().map(|&i| (current_input[i] - prev_input[i]).abs()).sum::<f64>() / n;
            let avg = idx.iter().map(|&i| (current_input[i] + prev_input[i]) / 2.0).sum::<f64>() / n;
            Ok(diff > avg.abs())
        })
        .collect()
}

/// Decides resets trial by trial for a model's gating rule.
#[derive(Debug, Clone, Default)]
pub struct GateTracker {
    prev_label: Option<usize>,
    prev_input: Option<Vec<f64>>,
    position: usize,
}

impl GateTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next(&mut self, spec: &ModelSpec, input: &[f64], label: usize) -> Result<Reset> {
        let first = self.position == 0;
        let reset = if first {
            Reset::All
        } else {
            match &spec.gating {
                Gating::None => Reset::Keep,
                Gating::LabelReset => {
                    if label_gate(self.prev_label, label) {
                        Reset::All
                    } else {
                        Reset::Keep
                    }
                }
                Gating::Periodic { every } => {
                    if self.position.is_multiple_of(*every) {
                        Reset::All
                    } else {
                        Reset::Keep
                    }
                }
                Gating::InputReset { monitors } => {
                    let prev = self.prev_input.as_deref().unwrap_or(input);
                    Reset::Units(input_gate(prev, input, monitors)?)
                }
            }
        };
        self.prev_label = Some(label);
        if matches!(spec.gating, Gating::InputReset { .. }) {
            self.prev_input = Some(input.to_vec());
        }
        self.position += 1;
        Ok(reset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    /// Hidden state cleared before the sample and not kept.
    Stateless,
    /// State evolves along the given order with the model's gating.
    Ordered,
}

/// Output for one sample without memory. Never mutates `state`.
pub fn predict(spec: &ModelSpec, state: &ModelState, input: &[f64]) -> Result<Vec<f64>> {
    let mut scratch = state.clone();
    Ok(forward(spec, &mut scratch, input, &Reset::All)?.output)
}

/// Outputs along `order` (indices into `inputs`). In ordered mode the
/// hidden state starts at zero and evolves with gating; `hidden_out`
/// receives `H(n)` per position when given.
pub fn predict_sequence(
    spec: &ModelSpec,
    state: &ModelState,
    inputs: &[Vec<f64>],
    labels: &[usize],
    order: &[usize],
    mode: PredictMode,
    mut hidden_out: Option<&mut Vec<Vec<f64>>>,
) -> Result<Vec<Vec<f64>>> {
    let mut scratch = state.clone();
    scratch.reset_hidden();
    let mut gates = GateTracker::new();
    let mut outputs = Vec::with_capacity(order.len());
    for &i in order {
        let reset = match mode {
            PredictMode::Stateless => Reset::All,
            PredictMode::Ordered => gates.next(spec, &inputs[i], labels[i])?,
        };
        let trace = forward(spec, &mut scratch, &inputs[i], &reset)?;
        if let Some(h) = hidden_out.as_deref_mut() {
            h.push(trace.hidden);
        }
        outputs.push(trace.output);
    }
    Ok(outputs)
}
