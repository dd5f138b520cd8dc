//! Incremental and mini-batch training loops with periodic evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::lstm::{lstm_bptt_train, lstm_predict_sequence, LstmSpec, LstmState};
use crate::metrics::per_feature_error;
use crate::models::{
    backward_leak_unaware, forward, one_hot, predict_sequence, GateTracker, ModelGrads, ModelSpec, ModelState,
    PredictMode, Reset, Task,
};
use crate::numerics::argmax;
use crate::optim::{GradientAccumulator, Optimizer, OptimizerConfig};
use crate::sampling::Schedule;

pub const DEFAULT_EVAL_EVERY: usize = 100;

/// How the held-out set is presented at evaluation time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalMode {
    Stateless,
    /// Hidden state evolves along this order of test indices.
    Ordered(Vec<usize>),
}

impl EvalMode {
    fn parts<'a>(&'a self, test: &Dataset, all: &'a mut Vec<usize>) -> (&'a [usize], PredictMode) {
        match self {
            EvalMode::Stateless => {
                *all = (0..test.len()).collect();
                (all.as_slice(), PredictMode::Stateless)
            }
            EvalMode::Ordered(order) => (order.as_slice(), PredictMode::Ordered),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub eval_every: usize,
    pub eval_mode: EvalMode,
    /// 1 = incremental.
    pub batch_size: usize,
    /// Keep every trial's hidden state for continuity checks and metrics.
    pub record_hidden: bool,
    /// Snapshot parameters after every update.
    pub record_params: bool,
    /// Output groups for per-feature autoencoder error.
    pub feature_groups: Option<Vec<Vec<usize>>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            eval_every: DEFAULT_EVAL_EVERY,
            eval_mode: EvalMode::Stateless,
            batch_size: 1,
            record_hidden: false,
            record_params: false,
            feature_groups: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config { field: "training.eval_every".into(), message: "must be >= 1".into() });
        }
        if self.batch_size == 0 {
            return Err(Error::Config { field: "training.batch_size".into(), message: "must be >= 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub run: usize,
    pub condition: String,
    pub iteration: usize,
    pub samples_seen: usize,
    /// Mean training loss since the previous record.
    pub train_loss: Option<f64>,
    pub test_loss: f64,
    pub test_acc: Option<f64>,
    #[serde(skip)]
    pub per_feature: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainCurve {
    pub records: Vec<CurveRecord>,
}

impl TrainCurve {
    pub fn extend(&mut self, other: TrainCurve) {
        self.records.extend(other.records);
    }

    pub fn last(&self) -> Option<&CurveRecord> {
        self.records.last()
    }

    /// Column order: `run,condition,iteration,samples_seen,train_loss,test_loss,test_acc`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["run", "condition", "iteration", "samples_seen", "train_loss", "test_loss", "test_acc"])?;
        for r in &self.records {
            w.write_record([
                r.run.to_string(),
                r.condition.clone(),
                r.iteration.to_string(),
                r.samples_seen.to_string(),
                r.train_loss.map(|v| v.to_string()).unwrap_or_default(),
                r.test_loss.to_string(),
                r.test_acc.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub per_feature: Option<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    /// Hidden state per evaluated position (empty for LSTMs).
    pub hidden: Vec<Vec<f64>>,
}

/// Mean loss and accuracy (or per-feature error) on `test`. `state` is not
/// modified.
pub fn evaluate(
    spec: &ModelSpec,
    state: &ModelState,
    test: &Dataset,
    mode: &EvalMode,
    groups: Option<&[Vec<usize>]>,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut all = Vec::new();
    let (order, pm) = mode.parts(test, &mut all);
    let mut hidden = Vec::with_capacity(order.len());
    let outputs = predict_sequence(spec, state, &test.samples, &test.labels, order, pm, Some(&mut hidden))?;
    let targets: Vec<Vec<f64>> = order.iter().map(|&i| spec.target(&test.samples[i], test.labels[i])).collect();
    summarize(spec.task, |o, t| spec.loss_and_grad(o, t).map(|v| v.0), outputs, targets, hidden, groups)
}

fn summarize(
    task: Task,
    loss_fn: impl Fn(&[f64], &[f64]) -> Result<f64>,
    outputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
    groups: Option<&[Vec<usize>]>,
) -> Result<Evaluation> {
    let n = outputs.len() as f64;
    let mut loss = 0.0;
    for (o, t) in outputs.iter().zip(&targets) {
        loss += loss_fn(o, t)?;
    }
    let accuracy = match task {
        Task::Classifier => {
            Some(outputs.iter().zip(&targets).filter(|(o, t)| argmax(o) == argmax(t)).count() as f64 / n)
        }
        Task::Autoencoder => None,
    };
    let per_feature = match (task, groups) {
        (Task::Autoencoder, Some(g)) => Some(per_feature_error(&outputs, &targets, g)?),
        _ => None,
    };
    Ok(Evaluation { loss: loss / n, accuracy, per_feature, outputs, hidden })
}

/// One training trial as seen by the hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub epoch: usize,
    pub position: usize,
    pub h_prev: Vec<f64>,
    pub hidden: Vec<f64>,
    pub effective_alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: ModelState,
    pub curve: TrainCurve,
    pub trials: Vec<TrialRecord>,
    pub snapshots: Vec<ModelState>,
}

/// Tracks when the next evaluation is due and the running train loss.
struct Recorder<'a> {
    run: usize,
    condition: &'a str,
    eval_every: usize,
    next_eval: usize,
    loss_sum: f64,
    loss_count: usize,
    curve: TrainCurve,
}

impl<'a> Recorder<'a> {
    fn new(run: usize, condition: &'a str, eval_every: usize) -> Self {
        Self {
            run,
            condition,
            eval_every,
            next_eval: eval_every,
            loss_sum: 0.0,
            loss_count: 0,
            curve: TrainCurve::default(),
        }
    }

    fn add_loss(&mut self, loss: f64, count: usize) {
        self.loss_sum += loss;
        self.loss_count += count;
    }

    fn due(&self, seen: usize) -> bool {
        seen >= self.next_eval
    }

    fn last_seen(&self) -> Option<usize> {
        self.curve.records.last().map(|r| r.samples_seen)
    }

    fn record(&mut self, seen: usize, eval: &Evaluation) {
        while self.next_eval <= seen {
            self.next_eval += self.eval_every;
        }
        let train_loss = (self.loss_count > 0).then(|| self.loss_sum / self.loss_count as f64);
        self.loss_sum = 0.0;
        self.loss_count = 0;
        self.curve.records.push(CurveRecord {
            run: self.run,
            condition: self.condition.to_string(),
            iteration: seen,
            samples_seen: seen,
            train_loss,
            test_loss: eval.loss,
            test_acc: eval.accuracy,
            per_feature: eval.per_feature.clone(),
        });
    }
}

fn check_schedule(schedule: &Schedule, train: &Dataset) -> Result<()> {
    schedule.validate(train).map_err(|e| Error::invalid(format!("schedule does not match dataset: {e}")))
}

/// One forward, one leak-unaware backward, and one optimizer step per
/// scheduled sample. Hidden state and gating restart at every epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_incremental(
    spec: &ModelSpec,
    mut state: ModelState,
    train: &Dataset,
    schedule: &Schedule,
    test: &Dataset,
    opt: &OptimizerConfig,
    cfg: &TrainConfig,
    run: usize,
) -> Result<TrainOutcome> {
    spec.validate()?;
    cfg.validate()?;
    check_schedule(schedule, train)?;
    if cfg.batch_size != 1 {
        return Err(Error::invalid("train_incremental requires batch_size 1"));
    }
    let condition = schedule.condition.to_string();
    let groups = cfg.feature_groups.as_deref();
    let mut optimizer = Optimizer::new(*opt)?;
    let mut rec = Recorder::new(run, &condition, cfg.eval_every);
    let mut trials = Vec::new();
    let mut snapshots = Vec::new();
    rec.record(0, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
    let mut seen = 0;
    for epoch in 0..cfg.epochs {
        state.reset_hidden();
        let mut gates = GateTracker::new();
        for (position, &idx) in schedule.order.iter().enumerate() {
            let x = &train.samples[idx];
            let label = train.labels[idx];
            let reset = gates.next(spec, x, label)?;
            let trace = forward(spec, &mut state, x, &reset)?;
            let (loss, grads) = backward_leak_unaware(spec, &state, &trace, &spec.target(x, label))?;
            optimizer.step(&mut state, &grads)?;
            rec.add_loss(loss, 1);
            seen += 1;
            if cfg.record_hidden {
                trials.push(TrialRecord {
                    epoch,
                    position,
                    h_prev: trace.h_prev,
                    hidden: trace.hidden,
                    effective_alpha: trace.effective_alpha,
                });
            }
            if cfg.record_params {
                snapshots.push(state.clone());
            }
            if rec.due(seen) {
                rec.record(seen, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
            }
        }
        if rec.last_seen() != Some(seen) {
            rec.record(seen, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
        }
    }
    Ok(TrainOutcome { state, curve: rec.curve, trials, snapshots })
}

/// Averages `batch_size` per-sample gradients before each update. Memoryless
/// specs only. A final short batch is flushed at the end of each epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_minibatch(
    spec: &ModelSpec,
    mut state: ModelState,
    train: &Dataset,
    schedule: &Schedule,
    test: &Dataset,
    opt: &OptimizerConfig,
    cfg: &TrainConfig,
    run: usize,
) -> Result<TrainOutcome> {
    spec.validate()?;
    cfg.validate()?;
    check_schedule(schedule, train)?;
    if spec.has_memory() {
        return Err(Error::invalid("mini-batch training is only defined for models without leak"));
    }
    let condition = schedule.condition.to_string();
    let groups = cfg.feature_groups.as_deref();
    let mut optimizer = Optimizer::new(*opt)?;
    let mut rec = Recorder::new(run, &condition, cfg.eval_every);
    let mut acc = GradientAccumulator::new();
    let mut mean = ModelGrads::zeros(spec);
    let mut snapshots = Vec::new();
    rec.record(0, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
    let mut seen = 0;
    for _ in 0..cfg.epochs {
        state.reset_hidden();
        let n = schedule.order.len();
        for (position, &idx) in schedule.order.iter().enumerate() {
            let x = &train.samples[idx];
            let label = train.labels[idx];
            let trace = forward(spec, &mut state, x, &Reset::All)?;
            let (loss, grads) = backward_leak_unaware(spec, &state, &trace, &spec.target(x, label))?;
            acc.push(&grads);
            rec.add_loss(loss, 1);
            if acc.len() == cfg.batch_size || position + 1 == n {
                seen += acc.len();
                acc.flush_into(&mut mean)?;
                optimizer.step(&mut state, &mean)?;
                if cfg.record_params {
                    snapshots.push(state.clone());
                }
                if rec.due(seen) {
                    rec.record(seen, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
                }
            }
        }
        if rec.last_seen() != Some(seen) {
            rec.record(seen, &evaluate(spec, &state, test, &cfg.eval_mode, groups)?);
        }
    }
    Ok(TrainOutcome { state, curve: rec.curve, trials: Vec::new(), snapshots })
}

/// Loss and accuracy of an LSTM classifier on `test`.
pub fn evaluate_lstm(spec: &LstmSpec, state: &LstmState, test: &Dataset, mode: &EvalMode) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut all = Vec::new();
    let (order, pm) = mode.parts(test, &mut all);
    let outputs = lstm_predict_sequence(spec, state, &test.samples, order, pm)?;
    let targets: Vec<Vec<f64>> = order.iter().map(|&i| one_hot(test.labels[i], spec.output_dim)).collect();
    let loss = spec.loss;
    summarize(
        Task::Classifier,
        |o, t| crate::models::loss_and_grad(loss, crate::models::OutputActivation::Softmax, o, t).map(|v| v.0),
        outputs,
        targets,
        Vec::new(),
        None,
    )
}

#[derive(Debug, Clone)]
pub struct LstmOutcome {
    pub state: LstmState,
    pub curve: TrainCurve,
}

/// Truncated BPTT over consecutive windows of the schedule. `h` and `c`
/// carry across windows and reset at each epoch; the last window of an epoch
/// may be shorter.
#[allow(clippy::too_many_arguments)]
pub fn train_lstm(
    spec: &LstmSpec,
    mut state: LstmState,
    train: &Dataset,
    schedule: &Schedule,
    test: &Dataset,
    opt: &OptimizerConfig,
    cfg: &TrainConfig,
    run: usize,
) -> Result<LstmOutcome> {
    spec.validate()?;
    cfg.validate()?;
    check_schedule(schedule, train)?;
    let condition = schedule.condition.to_string();
    let mut optimizer = Optimizer::new(*opt)?;
    let mut rec = Recorder::new(run, &condition, cfg.eval_every);
    rec.record(0, &evaluate_lstm(spec, &state, test, &cfg.eval_mode)?);
    let mut seen = 0;
    for _ in 0..cfg.epochs {
        state.reset_state();
        for chunk in schedule.order.chunks(spec.window_length) {
            let window: Vec<(Vec<f64>, Vec<f64>)> =
                chunk.iter().map(|&i| (train.samples[i].clone(), one_hot(train.labels[i], spec.output_dim))).collect();
            let mean_loss = lstm_bptt_train(spec, &mut state, &window, &mut optimizer)?;
            rec.add_loss(mean_loss * chunk.len() as f64, chunk.len());
            seen += chunk.len();
            if rec.due(seen) {
                rec.record(seen, &evaluate_lstm(spec, &state, test, &cfg.eval_mode)?);
            }
        }
        if rec.last_seen() != Some(seen) {
            rec.record(seen, &evaluate_lstm(spec, &state, test, &cfg.eval_mode)?);
        }
    }
    Ok(LstmOutcome { state, curve: rec.curve })
}
