//! Central finite differences against the analytic backward passes.

mod common;

use common::{leaky_case, lstm_case, plain_forward, random_vec, REL_TOL};
use tempolearn::lstm::{lstm_window_grads, LstmSpec, LstmState};
use tempolearn::models::{forward, Loss, ModelSpec, ModelState, OutputActivation, Reset};
use tempolearn::numerics::Rng;

#[test]
fn leaky_and_feedforward_gradients_match_finite_differences() {
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    for loss in [Loss::Mse, Loss::Ce] {
        for act in [OutputActivation::Softmax, OutputActivation::Sigmoid] {
            for alpha in [0.0, 0.3, 0.5, 0.6] {
                for s in 0..8 {
                    let e = leaky_case(1000 * cases as u64 + s, loss, act, alpha);
                    assert!(e < REL_TOL, "{loss:?}/{act:?}/alpha {alpha} seed {s}: rel error {e:e}");
                    worst = worst.max(e);
                    cases += 1;
                }
            }
        }
    }
    assert!(cases >= 100);
    println!("{cases} leaky/feedforward instances, worst rel error {worst:e}");
}

#[test]
fn lstm_bptt_gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let e = lstm_case(seed);
        assert!(e < REL_TOL, "seed {seed}: rel error {e:e}");
        worst = worst.max(e);
    }
    println!("100 lstm instances, worst rel error {worst:e}");
}

#[test]
fn zero_leak_model_is_bitwise_feedforward() {
    let spec = ModelSpec::classifier(6, 5, 3);
    let mut rng = Rng::new(77);
    let mut state = ModelState::init(&spec, &mut rng).unwrap();
    for _ in 0..50 {
        let x = random_vec(&mut rng, 6, 0.0, 1.0);
        let (hidden, out) = plain_forward(&state.w_ih, &state.b_h, &state.w_ho, &state.b_o, &x);
        let trace = forward(&spec, &mut state, &x, &Reset::Keep).unwrap();
        assert_eq!(trace.hidden, hidden);
        assert_eq!(trace.output, out);
    }
}

#[test]
fn window_of_one_has_no_temporal_gradient() {
    // two one-step windows from the same h, c but different earlier inputs
    let spec = LstmSpec::new(3, 4, 2).with_window(1);
    let mut rng = Rng::new(5);
    let st = LstmState::init(&spec, &mut rng).unwrap();
    let x = vec![0.2, 0.5, 0.9];
    let t = vec![1.0, 0.0];
    let mut a = st.clone();
    let (_, ga) = lstm_window_grads(&spec, &mut a, &[(x.clone(), t.clone())]).unwrap();
    let mut b = st.clone();
    let (_, gb) = lstm_window_grads(&spec, &mut b, &[(x, t)]).unwrap();
    assert_eq!(ga, gb);
    // gradient wrt W_h only flows through the carried h, which is constant
    let mut zero = st;
    zero.reset_state();
    let (_, gz) = lstm_window_grads(&spec, &mut zero, &[(vec![0.2, 0.5, 0.9], vec![1.0, 0.0])]).unwrap();
    assert!(gz.w_h.as_slice().iter().all(|&v| v == 0.0));
}
