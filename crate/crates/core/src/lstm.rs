//! Single-layer LSTM classifier trained with truncated backpropagation
//! through time.
//!
//! Gate pre-activations are stacked `[i, f, o, g]` in one `4H`-row block:
//!
//! ```text
//! z = W_x·x + W_h·h_prev + b
//! i, f, o = σ(z_i), σ(z_f), σ(z_o);  g = tanh(z_g)
//! c = f⊙c_prev + i⊙g;  h = o⊙tanh(c)
//! y = softmax(W_out·h + b_out)
//! ```
//!
//! The loss is applied at every step of a window and summed; `h` and `c`
//! carry across windows as constants.

use crate::checkpoint::Checkpoint;
use crate::error::{check_dim, Error, Result};
use crate::models::{output_delta, Loss, OutputActivation, PredictMode};
use crate::numerics::{sigmoid_scalar, softmax, xavier_init, Matrix, Rng};
use crate::optim::{Optimizer, ParamTensors};

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub window_length: usize,
    pub loss: Loss,
}

impl LstmSpec {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, hidden_dim, output_dim, window_length: DEFAULT_WINDOW, loss: Loss::Mse }
    }

    pub fn with_window(mut self, window_length: usize) -> Self {
        self.window_length = window_length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config { field: "lstm.dims".into(), message: "all dimensions must be >= 1".into() });
        }
        if self.window_length == 0 {
            return Err(Error::Config { field: "lstm.window_length".into(), message: "must be >= 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    /// Xavier per gate block, zero biases, zero `h` and `c`.
    pub fn init(spec: &LstmSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let (i, h, o) = (spec.input_dim, spec.hidden_dim, spec.output_dim);
        let mut w_x = Matrix::zeros(4 * h, i);
        let mut w_h = Matrix::zeros(4 * h, h);
        for gate in 0..4 {
            let bx = xavier_init(rng, i, h)?;
            let bh = xavier_init(rng, h, h)?;
            w_x.as_mut_slice()[gate * h * i..(gate + 1) * h * i].copy_from_slice(bx.as_slice());
            w_h.as_mut_slice()[gate * h * h..(gate + 1) * h * h].copy_from_slice(bh.as_slice());
        }
        Ok(Self {
            w_x,
            w_h,
            b: vec![0.0; 4 * h],
            w_out: xavier_init(rng, h, o)?,
            b_out: vec![0.0; o],
            h: vec![0.0; h],
            c: vec![0.0; h],
        })
    }

    pub fn reset_state(&mut self) {
        self.h.iter_mut().for_each(|v| *v = 0.0);
        self.c.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
            && self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self, spec: &LstmSpec) -> Checkpoint {
        let mut c = Checkpoint::new("lstm", vec![spec.input_dim, spec.hidden_dim, spec.output_dim]);
        for (name, t) in self.tensors() {
            c.push(name, t);
        }
        c
    }

    pub fn from_checkpoint(spec: &LstmSpec, ck: &Checkpoint) -> Result<Self> {
        let mut st = Self::init(spec, &mut Rng::new(0))?;
        if ck.kind != "lstm" || ck.dims != [spec.input_dim, spec.hidden_dim, spec.output_dim] {
            return Err(Error::invalid("checkpoint does not match lstm spec"));
        }
        for (name, t) in st.tensors_mut() {
            let src = ck.get_len(name, t.len())?;
            t.copy_from_slice(src);
        }
        Ok(st)
    }
}

macro_rules! lstm_tensors {
    ($t:ty) => {
        impl ParamTensors for $t {
            fn tensors(&self) -> Vec<(&'static str, &[f64])> {
                vec![
                    ("w_x", self.w_x.as_slice()),
                    ("w_h", self.w_h.as_slice()),
                    ("b", &self.b),
                    ("w_out", self.w_out.as_slice()),
                    ("b_out", &self.b_out),
                ]
            }

            fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
                vec![
                    ("w_x", self.w_x.as_mut_slice()),
                    ("w_h", self.w_h.as_mut_slice()),
                    ("b", &mut self.b),
                    ("w_out", self.w_out.as_mut_slice()),
                    ("b_out", &mut self.b_out),
                ]
            }
        }
    };
}

lstm_tensors!(LstmState);
lstm_tensors!(LstmGrads);

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros(spec: &LstmSpec) -> Self {
        let (i, h, o) = (spec.input_dim, spec.hidden_dim, spec.output_dim);
        Self {
            w_x: Matrix::zeros(4 * h, i),
            w_h: Matrix::zeros(4 * h, h),
            b: vec![0.0; 4 * h],
            w_out: Matrix::zeros(o, h),
            b_out: vec![0.0; o],
        }
    }
}

/// Cached activations of one step.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub input: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// `[i, f, o, g]` after their nonlinearities.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub output: Vec<f64>,
}

/// One cell update; advances `state.h` and `state.c`.
pub fn lstm_step(spec: &LstmSpec, state: &mut LstmState, input: &[f64]) -> Result<LstmStep> {
    check_dim("lstm input", spec.input_dim, input.len())?;
    let h = spec.hidden_dim;
    let mut z = state.w_x.matvec(input);
    let zh = state.w_h.matvec(&state.h);
    for (k, v) in z.iter_mut().enumerate() {
        *v += zh[k] + state.b[k];
    }
    let gates: Vec<f64> =
        z.iter().enumerate().map(|(k, &v)| if k < 3 * h { sigmoid_scalar(v) } else { v.tanh() }).collect();
    let c: Vec<f64> = (0..h).map(|j| gates[h + j] * state.c[j] + gates[j] * gates[3 * h + j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let hn: Vec<f64> = (0..h).map(|j| gates[2 * h + j] * tanh_c[j]).collect();
    let mut pre = state.w_out.matvec(&hn);
    pre.iter_mut().zip(&state.b_out).for_each(|(p, b)| *p += b);
    let output = softmax(&pre);
    let h_prev = std::mem::replace(&mut state.h, hn.clone());
    let c_prev = std::mem::replace(&mut state.c, c.clone());
    Ok(LstmStep { input: input.to_vec(), h_prev, c_prev, gates, c, tanh_c, h: hn, output })
}

/// Summed loss and BPTT gradients over `window`, starting from the current
/// `h`/`c`. Advances the state through the window.
pub fn lstm_window_grads(
    spec: &LstmSpec,
    state: &mut LstmState,
    window: &[(Vec<f64>, Vec<f64>)],
) -> Result<(f64, LstmGrads)> {
    if window.is_empty() {
        return Err(Error::invalid("empty BPTT window"));
    }
    let h = spec.hidden_dim;
    let mut steps = Vec::with_capacity(window.len());
    for (x, _) in window {
        steps.push(lstm_step(spec, state, x)?);
    }
    let mut g = LstmGrads::zeros(spec);
    let mut total = 0.0;
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for (step, (_, target)) in steps.iter().zip(window).rev() {
        check_dim("lstm target", spec.output_dim, target.len())?;
        let (loss, d_out) = output_delta(spec.loss, OutputActivation::Softmax, &step.output, target)?;
        total += loss;
        g.w_out.add_outer(1.0, &d_out, &step.h);
        g.b_out.iter_mut().zip(&d_out).for_each(|(a, d)| *a += d);
        let mut dh = state.w_out.matvec_t(&d_out);
        dh.iter_mut().zip(&dh_next).for_each(|(a, b)| *a += b);
        let mut dz = vec![0.0; 4 * h];
        for j in 0..h {
            let (i, f, o, gg) = (step.gates[j], step.gates[h + j], step.gates[2 * h + j], step.gates[3 * h + j]);
            let tc = step.tanh_c[j];
            let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
            dz[j] = dc * gg * i * (1.0 - i);
            dz[h + j] = dc * step.c_prev[j] * f * (1.0 - f);
            dz[2 * h + j] = dh[j] * tc * o * (1.0 - o);
            dz[3 * h + j] = dc * i * (1.0 - gg * gg);
            dc_next[j] = dc * f;
        }
        g.w_x.add_outer(1.0, &dz, &step.input);
        g.w_h.add_outer(1.0, &dz, &step.h_prev);
        g.b.iter_mut().zip(&dz).for_each(|(a, d)| *a += d);
        dh_next = state.w_h.matvec_t(&dz);
    }
    Ok((total, g))
}

/// BPTT over one window followed by a single optimizer update. Returns the
/// mean per-step loss.
pub fn lstm_bptt_train(
    spec: &LstmSpec,
    state: &mut LstmState,
    window: &[(Vec<f64>, Vec<f64>)],
    optimizer: &mut Optimizer,
) -> Result<f64> {
    let (total, grads) = lstm_window_grads(spec, state, window)?;
    optimizer.step(state, &grads)?;
    Ok(total / window.len() as f64)
}

/// Outputs along `order` without touching `state`. Stateless mode clears
/// `h`/`c` before every sample; ordered mode starts from zero and carries.
pub fn lstm_predict_sequence(
    spec: &LstmSpec,
    state: &LstmState,
    inputs: &[Vec<f64>],
    order: &[usize],
    mode: PredictMode,
) -> Result<Vec<Vec<f64>>> {
    let mut scratch = state.clone();
    scratch.reset_state();
    order
        .iter()
        .map(|&i| {
            if mode == PredictMode::Stateless {
                scratch.reset_state();
            }
            Ok(lstm_step(spec, &mut scratch, &inputs[i])?.output)
        })
        .collect()
}
