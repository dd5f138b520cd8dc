//! Finite-difference oracles shared by the gradient and acceptance tests.
#![allow(dead_code)]

use tempolearn::lstm::{lstm_window_grads, LstmSpec, LstmState};
use tempolearn::models::{backward_leak_unaware, forward, Loss, ModelSpec, ModelState, OutputActivation, Reset};
use tempolearn::numerics::{relu, softmax, Matrix, Rng};
use tempolearn::optim::ParamTensors;

pub const STEP: f64 = 1e-6;
pub const REL_TOL: f64 = 1e-5;

/// ‖a − n‖ / (‖a‖ + ‖n‖), zero when both vanish.
pub fn rel_error(a: &[f64], n: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + n.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn numeric_grads<P: ParamTensors + Clone>(params: &P, loss: impl Fn(&P) -> f64) -> Vec<(&'static str, Vec<f64>)> {
    let names: Vec<(&'static str, usize)> = params.tensors().iter().map(|(n, t)| (*n, t.len())).collect();
    names
        .into_iter()
        .enumerate()
        .map(|(ti, (name, len))| {
            let g = (0..len)
                .map(|k| {
                    let mut plus = params.clone();
                    plus.tensors_mut()[ti].1[k] += STEP;
                    let mut minus = params.clone();
                    minus.tensors_mut()[ti].1[k] -= STEP;
                    (loss(&plus) - loss(&minus)) / (2.0 * STEP)
                })
                .collect();
            (name, g)
        })
        .collect()
}

pub fn random_vec(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

/// Worst relative error of one leaky/feedforward instance.
pub fn leaky_case(seed: u64, loss: Loss, act: OutputActivation, alpha: f64) -> f64 {
    let mut rng = Rng::new(seed);
    let i = 2 + rng.below(5);
    let h = 2 + rng.below(5);
    let o = 2 + rng.below(4);
    let spec = ModelSpec::classifier(i, h, o).with_loss(loss).with_output(act).with_uniform_alpha(alpha);
    let mut state = ModelState::init(&spec, &mut rng).unwrap();
    state.b_h = random_vec(&mut rng, h, -0.3, 0.3);
    state.b_o = random_vec(&mut rng, o, -0.3, 0.3);
    state.h_prev = random_vec(&mut rng, h, 0.0, 2.0);
    let input = random_vec(&mut rng, i, 0.0, 1.0);
    let target = match act {
        OutputActivation::Softmax => {
            let mut t = vec![0.0; o];
            t[rng.below(o)] = 1.0;
            t
        }
        OutputActivation::Sigmoid => random_vec(&mut rng, o, 0.05, 0.95),
    };
    let h_frozen = state.h_prev.clone();
    let trace = forward(&spec, &mut state, &input, &Reset::Keep).unwrap();
    let (_, analytic) = backward_leak_unaware(&spec, &state, &trace, &target).unwrap();
    let surrogate = |p: &ModelState| {
        let mut s = p.clone();
        s.h_prev = h_frozen.clone();
        let tr = forward(&spec, &mut s, &input, &Reset::Keep).unwrap();
        spec.loss_and_grad(&tr.output, &target).unwrap().0
    };
    let numeric = numeric_grads(&state, surrogate);
    analytic.tensors().iter().zip(&numeric).map(|((_, a), (_, n))| rel_error(a, n)).fold(0.0, f64::max)
}

pub fn lstm_case(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let i = 2 + rng.below(4);
    let h = 2 + rng.below(5);
    let o = 2 + rng.below(2);
    let w = 1 + rng.below(4);
    let spec = LstmSpec::new(i, h, o).with_window(w);
    let mut state = LstmState::init(&spec, &mut rng).unwrap();
    state.b = random_vec(&mut rng, 4 * h, -0.5, 0.5);
    state.h = random_vec(&mut rng, h, -0.5, 0.5);
    state.c = random_vec(&mut rng, h, -1.0, 1.0);
    let window: Vec<(Vec<f64>, Vec<f64>)> = (0..w)
        .map(|_| {
            let x = random_vec(&mut rng, i, 0.0, 1.0);
            let mut t = vec![0.0; o];
            t[rng.below(o)] = 1.0;
            (x, t)
        })
        .collect();
    let start = state.clone();
    let (_, analytic) = lstm_window_grads(&spec, &mut state, &window).unwrap();
    let loss = |p: &LstmState| {
        let mut s = p.clone();
        lstm_window_grads(&spec, &mut s, &window).unwrap().0
    };
    let numeric = numeric_grads(&start, loss);
    analytic.tensors().iter().zip(&numeric).map(|((_, a), (_, n))| rel_error(a, n)).fold(0.0, f64::max)
}

/// Direct feedforward implementation, same arithmetic order as `forward`.
pub fn plain_forward(w_ih: &Matrix, b_h: &[f64], w_ho: &Matrix, b_o: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pre = w_ih.matvec(x);
    pre.iter_mut().zip(b_h).for_each(|(z, b)| *z += b);
    let hidden = relu(&pre);
    let mut out = w_ho.matvec(&hidden);
    out.iter_mut().zip(b_o).for_each(|(z, b)| *z += b);
    (hidden, softmax(&out))
}

/// Case count and worst relative error over the leaky/feedforward grid.
pub fn leaky_sweep() -> (usize, f64) {
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for loss in [Loss::Mse, Loss::Ce] {
        for act in [OutputActivation::Softmax, OutputActivation::Sigmoid] {
            for alpha in [0.0, 0.3, 0.5, 0.6] {
                for s in 0..8 {
                    worst = worst.max(leaky_case(1000 * cases as u64 + s, loss, act, alpha));
                    cases += 1;
                }
            }
        }
    }
    (cases, worst)
}

pub fn lstm_sweep() -> (usize, f64) {
    (100, (0..100).map(lstm_case).fold(0.0, f64::max))
}
