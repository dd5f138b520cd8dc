//! Building blocks shared by the presets: seeded multi-run condition sweeps
//! for classifiers, LSTMs, and multi-scale autoencoders.

use std::thread;

use crate::datasets::{
    gen_low_overlap_with, gen_multiscale, Dataset, LowOverlapParams, MultiScaleParams, MultiScaleStream,
};
use crate::error::{Error, Result};
use crate::lstm::{LstmSpec, LstmState};
use crate::metrics::{bootstrap_mean_std, pearson_r, timescale_selectivity, BootstrapSummary, SelectivityReport};
use crate::models::{predict_sequence, Gating, Loss, ModelSpec, ModelState, PredictMode};
use crate::numerics::{derive_seed, Rng};
use crate::optim::OptimizerConfig;
use crate::sampling::{Condition, Schedule, Session};
use crate::training::{
    evaluate, train_incremental, train_lstm, train_minibatch, EvalMode, TrainConfig, TrainCurve, TrainOutcome,
};

pub const BOOTSTRAPS: usize = 10_000;

/// Seed of run `run` under a preset's master seed.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    derive_seed(master_seed, 1000 + run as u64)
}

/// Applies `f` to `0..n` across the available cores; results keep index
/// order, so output does not depend on scheduling.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(workers);
    thread::scope(|s| {
        for (w, part) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (k, slot) in part.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + k));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Train/test halves of the low-overlap set for a master seed.
pub fn synthetic_classification_data(master_seed: u64, params: &LowOverlapParams) -> Result<(Dataset, Dataset)> {
    let ds = gen_low_overlap_with(&mut Rng::new(master_seed).derive(10), params)?;
    ds.stratified_split(&mut Rng::new(master_seed).derive(11), 0.8)
}

/// Order in which the held-out set is shown to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestOrder {
    Stateless,
    /// Same smoothness condition as training, categories in a fresh cycle.
    MatchTrain,
    Fixed(Condition),
    /// Same condition and category cycle as training.
    SameStream,
    /// `Fixed`, but over the training category cycle.
    FixedSameCycle(Condition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierProtocol {
    pub hidden: usize,
    /// Train a (d, hidden, d) autoencoder on the same stream instead.
    pub reconstruct: bool,
    pub alpha: f64,
    pub gating: Gating,
    pub loss: Loss,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    /// End-of-epoch error is the mean over records in this many trailing
    /// iterations.
    pub end_window: usize,
    pub test_order: TestOrder,
}

impl ClassifierProtocol {
    pub fn feedforward(hidden: usize, optimizer: OptimizerConfig) -> Self {
        Self {
            hidden,
            reconstruct: false,
            alpha: 0.0,
            gating: Gating::None,
            loss: Loss::Mse,
            optimizer,
            epochs: 1,
            batch_size: 1,
            eval_every: 10,
            end_window: 100,
            test_order: TestOrder::Stateless,
        }
    }

    pub fn leaky(mut self, alpha: f64, gating: Gating) -> Self {
        self.alpha = alpha;
        self.gating = gating;
        self.test_order = TestOrder::MatchTrain;
        self
    }

    pub fn spec(&self, train: &Dataset) -> ModelSpec {
        let base = if self.reconstruct {
            ModelSpec::autoencoder(train.feature_dim, self.hidden)
        } else {
            ModelSpec::classifier(train.feature_dim, self.hidden, train.num_categories)
        };
        base.with_uniform_alpha(self.alpha).with_gating(self.gating.clone()).with_loss(self.loss)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub curve: TrainCurve,
    pub end_error: f64,
    pub end_accuracy: Option<f64>,
}

/// Mean test loss (and accuracy) over records in the last `window`
/// iterations of the curve.
pub fn end_of_training(curve: &TrainCurve, window: usize) -> Result<(f64, Option<f64>)> {
    let last = curve.last().ok_or_else(|| Error::invalid("empty curve"))?.iteration;
    let recs: Vec<_> = curve.records.iter().filter(|r| r.iteration + window > last && r.iteration > 0).collect();
    let recs = if recs.is_empty() { vec![curve.last().unwrap()] } else { recs };
    let n = recs.len() as f64;
    let err = recs.iter().map(|r| r.test_loss).sum::<f64>() / n;
    let acc = recs.iter().map(|r| r.test_acc).collect::<Option<Vec<f64>>>().map(|v| v.iter().sum::<f64>() / n);
    Ok((err, acc))
}

pub fn test_mode(test: &Dataset, order: TestOrder, train_condition: Condition, seed: u64) -> Result<EvalMode> {
    let (condition, same_cycle) = match order {
        TestOrder::Stateless => return Ok(EvalMode::Stateless),
        TestOrder::MatchTrain => (train_condition, false),
        TestOrder::Fixed(c) => (c, false),
        TestOrder::SameStream => (train_condition, true),
        TestOrder::FixedSameCycle(c) => (c, true),
    };
    Ok(EvalMode::Ordered(ordered_test_schedule(test, condition, seed, same_cycle)?.order))
}

/// Test stream for run `seed`. With `same_cycle` it visits categories in
/// the training session's order, so a model that learned that cycle can use
/// it; exemplar order is always the test session's own.
pub fn ordered_test_schedule(test: &Dataset, condition: Condition, seed: u64, same_cycle: bool) -> Result<Schedule> {
    let session = Session::new(test, derive_seed(seed, 14))?;
    if !same_cycle {
        return session.schedule(test, condition);
    }
    let train_order = Session::new(test, derive_seed(seed, 13))?.category_order;
    Session::with_category_order(test, session.seed, train_order)?.schedule(test, condition)
}

/// Training schedule for `condition` in run `seed`; every model in a run
/// shares it.
pub fn train_schedule(train: &Dataset, condition: Condition, seed: u64) -> Result<Schedule> {
    Session::new(train, derive_seed(seed, 13))?.schedule(train, condition)
}

/// Initial weights for run `seed`; shared by every condition and every
/// model with the same dimensions.
pub fn initial_state(spec: &ModelSpec, seed: u64) -> Result<ModelState> {
    ModelState::init(spec, &mut Rng::new(seed).derive(12))
}

pub fn classifier_run(
    train: &Dataset,
    test: &Dataset,
    proto: &ClassifierProtocol,
    condition: Condition,
    seed: u64,
    run: usize,
) -> Result<RunResult> {
    let spec = proto.spec(train);
    let state = initial_state(&spec, seed)?;
    let schedule = train_schedule(train, condition, seed)?;
    let cfg = TrainConfig {
        epochs: proto.epochs,
        eval_every: proto.eval_every,
        eval_mode: test_mode(test, proto.test_order, condition, seed)?,
        batch_size: proto.batch_size,
        ..Default::default()
    };
    let out: TrainOutcome = if proto.batch_size == 1 {
        train_incremental(&spec, state, train, &schedule, test, &proto.optimizer, &cfg, run)?
    } else {
        train_minibatch(&spec, state, train, &schedule, test, &proto.optimizer, &cfg, run)?
    };
    let (end_error, end_accuracy) = end_of_training(&out.curve, proto.end_window)?;
    Ok(RunResult { curve: out.curve, end_error, end_accuracy })
}

/// All runs of one condition.
#[derive(Debug, Clone)]
pub struct ConditionSummary {
    pub label: String,
    pub condition: Condition,
    pub end_errors: Vec<f64>,
    pub curve: TrainCurve,
}

impl ConditionSummary {
    pub fn mean(&self) -> f64 {
        self.end_errors.iter().sum::<f64>() / self.end_errors.len() as f64
    }

    pub fn bootstrap(&self, seed: u64) -> Result<BootstrapSummary> {
        bootstrap_mean_std(&self.end_errors, BOOTSTRAPS, self.end_errors.len(), &mut Rng::new(seed))
    }
}

pub fn classifier_sweep(
    train: &Dataset,
    test: &Dataset,
    proto: &ClassifierProtocol,
    label: &str,
    conditions: &[Condition],
    master_seed: u64,
    runs: usize,
) -> Result<Vec<ConditionSummary>> {
    conditions
        .iter()
        .map(|&condition| {
            let results = par_map(runs, |r| classifier_run(train, test, proto, condition, run_seed(master_seed, r), r));
            collect_summary(label, condition, results)
        })
        .collect()
}

fn collect_summary(label: &str, condition: Condition, results: Vec<Result<RunResult>>) -> Result<ConditionSummary> {
    let mut curve = TrainCurve::default();
    let mut end_errors = Vec::with_capacity(results.len());
    for r in results {
        let r = r?;
        end_errors.push(r.end_error);
        curve.extend(r.curve);
    }
    for rec in &mut curve.records {
        rec.condition = format!("{label}_{condition}");
    }
    Ok(ConditionSummary { label: label.to_string(), condition, end_errors, curve })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmProtocol {
    pub hidden: usize,
    pub window_length: usize,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub eval_every: usize,
    pub end_window: usize,
    pub test_order: TestOrder,
}

pub fn lstm_run(
    train: &Dataset,
    test: &Dataset,
    proto: &LstmProtocol,
    condition: Condition,
    seed: u64,
    run: usize,
) -> Result<RunResult> {
    let spec = LstmSpec::new(train.feature_dim, proto.hidden, train.num_categories).with_window(proto.window_length);
    let state = LstmState::init(&spec, &mut Rng::new(seed).derive(15))?;
    let schedule = train_schedule(train, condition, seed)?;
    let cfg = TrainConfig {
        epochs: proto.epochs,
        eval_every: proto.eval_every,
        eval_mode: test_mode(test, proto.test_order, condition, seed)?,
        ..Default::default()
    };
    let out = train_lstm(&spec, state, train, &schedule, test, &proto.optimizer, &cfg, run)?;
    let (end_error, end_accuracy) = end_of_training(&out.curve, proto.end_window)?;
    Ok(RunResult { curve: out.curve, end_error, end_accuracy })
}

pub fn lstm_sweep(
    train: &Dataset,
    test: &Dataset,
    proto: &LstmProtocol,
    label: &str,
    conditions: &[Condition],
    master_seed: u64,
    runs: usize,
) -> Result<Vec<ConditionSummary>> {
    conditions
        .iter()
        .map(|&condition| {
            let results = par_map(runs, |r| lstm_run(train, test, proto, condition, run_seed(master_seed, r), r));
            collect_summary(label, condition, results)
        })
        .collect()
}

/// The five autoencoder variants compared on multi-scale streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AeVariant {
    Feedforward,
    Leaky,
    MultiscaleLeaky,
    LeakyReset,
    MultiscaleLeakyReset,
}

impl AeVariant {
    pub const ALL: [AeVariant; 5] = [
        AeVariant::Feedforward,
        AeVariant::Leaky,
        AeVariant::MultiscaleLeaky,
        AeVariant::LeakyReset,
        AeVariant::MultiscaleLeakyReset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AeVariant::Feedforward => "feedforward",
            AeVariant::Leaky => "leaky",
            AeVariant::MultiscaleLeaky => "multiscale_leaky",
            AeVariant::LeakyReset => "leaky_reset",
            AeVariant::MultiscaleLeakyReset => "multiscale_leaky_reset",
        }
    }

    pub fn has_reset(self) -> bool {
        matches!(self, AeVariant::LeakyReset | AeVariant::MultiscaleLeakyReset)
    }

    pub fn has_memory(self) -> bool {
        self != AeVariant::Feedforward
    }

    /// (6, 3, 6) sigmoid autoencoder; hidden unit `j` plays role `j`
    /// (no, short, long memory) and monitors subcomponent `j`.
    pub fn spec(self) -> ModelSpec {
        let alphas = match self {
            AeVariant::Feedforward => vec![0.0; 3],
            AeVariant::Leaky | AeVariant::LeakyReset => vec![0.5; 3],
            AeVariant::MultiscaleLeaky | AeVariant::MultiscaleLeakyReset => vec![0.0, 0.3, 0.6],
        };
        let gating = if self.has_reset() {
            Gating::InputReset { monitors: MultiScaleStream::subcomponent_map() }
        } else {
            Gating::None
        };
        ModelSpec::autoencoder(6, 3).with_alphas(alphas).with_gating(gating)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiscaleProtocol {
    pub params: MultiScaleParams,
    pub train_length: usize,
    pub test_length: usize,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub eval_every: usize,
    pub end_window: usize,
}

impl Default for MultiscaleProtocol {
    fn default() -> Self {
        Self {
            params: MultiScaleParams::default(),
            train_length: 10_000,
            test_length: 3000,
            optimizer: OptimizerConfig::rmsprop(0.01),
            epochs: 1,
            eval_every: 100,
            end_window: 500,
        }
    }
}

/// Everything measured on one autoencoder run.
#[derive(Debug, Clone)]
pub struct AeRun {
    pub variant: AeVariant,
    pub curve: TrainCurve,
    pub untrained_error: f64,
    pub end_error: f64,
    /// Per-timescale error (fast, medium, slow) at the end of training.
    pub per_feature: Vec<f64>,
    /// Per-timescale error at an intermediate point (end of the first
    /// quarter of training).
    pub early_per_feature: Vec<f64>,
    pub selectivity: SelectivityReport,
    /// False for hidden units that were constant over the test stream.
    /// Their correlations are undefined: r² is stored as 0 and the role's
    /// selectivity should be left out of summaries.
    pub live: [bool; 3],
}

pub fn multiscale_streams(proto: &MultiscaleProtocol, seed: u64) -> Result<(MultiScaleStream, MultiScaleStream)> {
    let train = gen_multiscale(&mut Rng::new(seed).derive(20), proto.train_length, &proto.params)?;
    let test = gen_multiscale(&mut Rng::new(seed).derive(21), proto.test_length, &proto.params)?;
    Ok((train, test))
}

pub fn autoencoder_run(proto: &MultiscaleProtocol, variant: AeVariant, seed: u64, run: usize) -> Result<AeRun> {
    let (train_stream, test_stream) = multiscale_streams(proto, seed)?;
    let train = train_stream.to_dataset();
    let test = test_stream.to_dataset();
    let spec = variant.spec();
    let state = ModelState::init(&spec, &mut Rng::new(seed).derive(12))?;
    let groups = MultiScaleStream::subcomponent_map();
    let order: Vec<usize> = (0..test.len()).collect();
    let mode = EvalMode::Ordered(order.clone());
    let untrained_error = evaluate(&spec, &state, &test, &mode, None)?.loss;
    let schedule = Schedule::sequential(&train);
    let cfg = TrainConfig {
        epochs: proto.epochs,
        eval_every: proto.eval_every,
        eval_mode: mode.clone(),
        feature_groups: Some(groups.clone()),
        ..Default::default()
    };
    let out = train_incremental(&spec, state, &train, &schedule, &test, &proto.optimizer, &cfg, run)?;
    let mut curve = out.curve;
    for rec in &mut curve.records {
        rec.condition = variant.name().to_string();
    }
    let (end_error, _) = end_of_training(&curve, proto.end_window)?;
    let last = curve.last().map_or(0, |r| r.iteration);
    let early = curve
        .records
        .iter()
        .filter(|r| r.iteration > 0 && r.iteration <= last / 4)
        .filter_map(|r| r.per_feature.clone())
        .next_back()
        .ok_or_else(|| Error::invalid("no intermediate evaluation recorded"))?;
    let final_eval = evaluate(&spec, &out.state, &test, &mode, Some(&groups))?;
    let per_feature = final_eval.per_feature.clone().unwrap_or_default();
    let mut hidden_series = vec![Vec::new(); 3];
    let mut hidden = Vec::new();
    predict_sequence(&spec, &out.state, &test.samples, &test.labels, &order, PredictMode::Ordered, Some(&mut hidden))?;
    for h in &hidden {
        for (j, v) in h.iter().enumerate() {
            hidden_series[j].push(*v);
        }
    }
    let features: Vec<Vec<Vec<f64>>> =
        groups.iter().map(|g| g.iter().map(|&e| test.samples.iter().map(|s| s[e]).collect()).collect()).collect();
    let (selectivity, live) = selectivity_with_dead_units(&hidden_series, &features)?;
    Ok(AeRun { variant, curve, untrained_error, end_error, per_feature, early_per_feature: early, selectivity, live })
}

/// Timescale selectivity plus a liveness mask; a constant (dead) hidden
/// unit gets zero r² with every timescale.
pub fn selectivity_with_dead_units(
    hidden: &[Vec<f64>],
    features: &[Vec<Vec<f64>>],
) -> Result<(SelectivityReport, [bool; 3])> {
    match timescale_selectivity(hidden, features) {
        Ok(s) => Ok((s, [true; 3])),
        Err(Error::UndefinedCorrelation(_)) => {
            let mut r2 = [[0.0; 3]; 3];
            let mut live = [true; 3];
            for (role, h) in hidden.iter().enumerate() {
                let first = h.first().copied().unwrap_or(0.0);
                if h.iter().all(|&v| v == first) {
                    live[role] = false;
                    continue;
                }
                for (ts, elems) in features.iter().enumerate() {
                    let mut acc = 0.0;
                    for e in elems {
                        acc += pearson_r(h, e)?.powi(2);
                    }
                    r2[role][ts] = acc / elems.len() as f64;
                }
            }
            Ok((SelectivityReport::from_r_squared(r2), live))
        }
        Err(e) => Err(e),
    }
}

pub fn autoencoder_sweep(proto: &MultiscaleProtocol, master_seed: u64, runs: usize) -> Result<Vec<Vec<AeRun>>> {
    AeVariant::ALL
        .iter()
        .map(|&v| par_map(runs, |r| autoencoder_run(proto, v, run_seed(master_seed, r), r)).into_iter().collect())
        .collect()
}
