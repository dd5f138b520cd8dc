//! TOML run configuration with sections `[dataset]`, `[model]`,
//! `[schedule]`, `[optimizer]` and `[training]`.
//!
//! ```toml
//! [dataset]
//! kind = "low_overlap"        # low_overlap | non_overlapping | multiscale | mnist | csv
//! noise_halfwidth = 0.1
//!
//! [model]
//! kind = "leaky"              # leaky | lstm
//! hidden = 8
//! alpha = 0.5                 # or leak_alphas = [...] with one value per hidden unit
//! gating = { kind = "label_reset" }
//!
//! [schedule]
//! condition = "k5"            # k<N> | random | sequential
//! test = "match"              # stateless | match | k<N> | random | sequential
//! test_cycle = "fresh"        # fresh | train: category cycle of an ordered test stream
//!
//! [optimizer]
//! kind = "rmsprop"
//! learning_rate = 0.01
//!
//! [training]
//! runs = 10
//! ```
//!
//! Run `r` uses seed `derive_seed(seed, 1000 + r)` and writes its curve into
//! `curves.csv`; `summary.csv` holds one row per run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datasets::{
    gen_low_overlap_with, gen_multiscale, gen_non_overlapping_stream, load_mnist_dir, Dataset, LowOverlapParams,
    MultiScaleParams, MultiScaleStream,
};
use crate::error::{Error, Result};
use crate::experiments::protocol::{end_of_training, ordered_test_schedule, par_map, run_seed};
use crate::lstm::{LstmSpec, LstmState, DEFAULT_WINDOW};
use crate::models::{Gating, Loss, ModelSpec, ModelState, OutputActivation, Task};
use crate::numerics::{derive_seed, Rng};
use crate::optim::OptimizerConfig;
use crate::sampling::{Condition, Schedule, Session};
use crate::training::{
    train_incremental, train_lstm, train_minibatch, EvalMode, TrainConfig, TrainCurve, DEFAULT_EVAL_EVERY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    LowOverlap,
    NonOverlapping,
    Multiscale,
    Mnist,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    pub num_categories: usize,
    pub items_per_category: usize,
    pub dim: usize,
    pub noise_halfwidth: f64,
    pub low: f64,
    pub high: f64,
    pub antiphase: bool,
    /// Multi-scale stream lengths.
    pub train_length: usize,
    pub test_length: usize,
    pub periods: [usize; 3],
    /// Fraction held out when a generator produces one pool.
    pub test_fraction: f64,
    /// MNIST directory or training CSV.
    pub path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// MNIST subset sizes; absent means the full sets.
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let lo = LowOverlapParams::default();
        let ms = MultiScaleParams::default();
        Self {
            kind: DatasetKind::LowOverlap,
            num_categories: lo.num_categories,
            items_per_category: lo.items_per_category,
            dim: lo.dim,
            noise_halfwidth: lo.noise_halfwidth,
            low: lo.low,
            high: lo.high,
            antiphase: false,
            train_length: 3000,
            test_length: 3000,
            periods: ms.periods,
            test_fraction: 0.2,
            path: None,
            test_path: None,
            train_size: None,
            test_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Leaky,
    Lstm,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub task: Task,
    pub hidden: usize,
    pub alpha: f64,
    pub leak_alphas: Option<Vec<f64>>,
    pub gating: Gating,
    pub loss: Loss,
    pub output_activation: Option<OutputActivation>,
    pub use_bias: bool,
    pub window_length: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Leaky,
            task: Task::Classifier,
            hidden: 8,
            alpha: 0.0,
            leak_alphas: None,
            gating: Gating::None,
            loss: Loss::Mse,
            output_activation: None,
            use_bias: true,
            window_length: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub condition: String,
    /// `stateless`, `match` (same condition as training) or a condition.
    pub test: String,
    /// `fresh` or `train`: whether an ordered test stream reuses the
    /// training category cycle.
    pub test_cycle: String,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { condition: "random".into(), test: "stateless".into(), test_cycle: "fresh".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub eval_every: usize,
    pub batch_size: usize,
    pub runs: usize,
    /// Default seed when none is given on the command line.
    pub seed: u64,
    /// End-of-training error averages records in this many trailing
    /// iterations.
    pub end_window: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { epochs: 1, eval_every: DEFAULT_EVAL_EVERY, batch_size: 1, runs: 1, seed: 0, end_window: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: OptimizerConfig,
    pub training: TrainingConfig,
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

fn parse_condition(field: &str, s: &str) -> Result<Condition> {
    s.parse().map_err(|_| cfg_err(field, format!("unknown condition `{s}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| text[s].trim().to_string()).unwrap_or_default();
            cfg_err(&field, e.message().to_string())
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn train_condition(&self) -> Result<Condition> {
        parse_condition("schedule.condition", &self.schedule.condition)
    }

    /// `None` for stateless evaluation.
    pub fn test_condition(&self) -> Result<Option<Condition>> {
        match self.schedule.test.as_str() {
            "stateless" => Ok(None),
            "match" => self.train_condition().map(Some),
            s => parse_condition("schedule.test", s).map(Some),
        }
    }

    pub fn test_same_cycle(&self) -> Result<bool> {
        match self.schedule.test_cycle.as_str() {
            "fresh" => Ok(false),
            "train" => Ok(true),
            s => Err(cfg_err("schedule.test_cycle", format!("expected fresh or train, got {s:?}"))),
        }
    }

    fn alphas(&self) -> Vec<f64> {
        self.model.leak_alphas.clone().unwrap_or_else(|| vec![self.model.alpha; self.model.hidden])
    }

    pub fn model_spec(&self, train: &Dataset) -> Result<ModelSpec> {
        let m = &self.model;
        let mut spec = match m.task {
            Task::Classifier => ModelSpec::classifier(train.feature_dim, m.hidden, train.num_categories),
            Task::Autoencoder => ModelSpec::autoencoder(train.feature_dim, m.hidden),
        }
        .with_alphas(self.alphas())
        .with_gating(m.gating.clone())
        .with_loss(m.loss);
        if let Some(act) = m.output_activation {
            spec = spec.with_output(act);
        }
        spec.use_bias = m.use_bias;
        spec.validate().map_err(|e| match e {
            Error::Config { field, message } => Error::Config { field: format!("model.{field}"), message },
            other => other,
        })?;
        Ok(spec)
    }

    pub fn lstm_spec(&self, train: &Dataset) -> Result<LstmSpec> {
        if self.model.task != Task::Classifier {
            return Err(cfg_err("model.task", "the LSTM baseline is a classifier"));
        }
        let spec = LstmSpec::new(train.feature_dim, self.model.hidden, train.num_categories)
            .with_window(self.model.window_length);
        spec.validate().map_err(|e| cfg_err("model.window_length", e.to_string()))?;
        Ok(spec)
    }

    /// Everything checkable without generating data.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if !(0.0..1.0).contains(&d.test_fraction) || d.test_fraction == 0.0 {
            return Err(cfg_err("dataset.test_fraction", "must lie in (0, 1)"));
        }
        if matches!(d.kind, DatasetKind::Mnist | DatasetKind::Csv) && d.path.is_none() {
            return Err(cfg_err("dataset.path", "required for mnist and csv datasets"));
        }
        if self.model.hidden == 0 {
            return Err(cfg_err("model.hidden", "must be >= 1"));
        }
        if let Some(a) = &self.model.leak_alphas {
            if a.len() != self.model.hidden {
                return Err(cfg_err(
                    "model.leak_alphas",
                    format!("{} values for {} hidden units", a.len(), self.model.hidden),
                ));
            }
        }
        self.train_condition()?;
        self.test_condition()?;
        self.test_same_cycle()?;
        self.optimizer.validate().map_err(|e| cfg_err("optimizer", e.to_string()))?;
        let t = &self.training;
        for (field, v) in
            [("training.eval_every", t.eval_every), ("training.batch_size", t.batch_size), ("training.runs", t.runs)]
        {
            if v == 0 {
                return Err(cfg_err(field, "must be >= 1"));
            }
        }
        if self.model.kind == ModelKind::Lstm && t.batch_size != 1 {
            return Err(cfg_err("training.batch_size", "the LSTM trains window by window"));
        }
        Ok(())
    }

    /// Train and test sets for `seed`.
    pub fn datasets(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        let d = &self.dataset;
        let rng = Rng::new(seed);
        let split = |ds: Dataset| ds.stratified_split(&mut rng.derive(11), 1.0 - d.test_fraction);
        match d.kind {
            DatasetKind::LowOverlap => {
                let p = LowOverlapParams {
                    num_categories: d.num_categories,
                    items_per_category: d.items_per_category,
                    dim: d.dim,
                    noise_halfwidth: d.noise_halfwidth,
                    low: d.low,
                    high: d.high,
                };
                split(gen_low_overlap_with(&mut rng.derive(10), &p)?)
            }
            DatasetKind::NonOverlapping => split(gen_non_overlapping_stream(
                &mut rng.derive(10),
                d.num_categories,
                d.items_per_category,
                d.dim,
                d.antiphase,
            )?),
            DatasetKind::Multiscale => {
                let p = self.multiscale_params();
                let train = gen_multiscale(&mut rng.derive(20), d.train_length, &p)?;
                let test = gen_multiscale(&mut rng.derive(21), d.test_length, &p)?;
                Ok((train.to_dataset(), test.to_dataset()))
            }
            DatasetKind::Mnist => {
                let dir = d.path.as_ref().expect("validated");
                let (train, test) = load_mnist_dir(dir)?;
                let train = match d.train_size {
                    Some(n) => train.random_subset(&mut rng.derive(31), n),
                    None => train,
                };
                let test = match d.test_size {
                    Some(n) => test.random_subset(&mut rng.derive(32), n),
                    None => test,
                };
                Ok((train, test))
            }
            DatasetKind::Csv => {
                let train = Dataset::read_csv(d.path.as_ref().expect("validated"), "csv")?;
                match &d.test_path {
                    Some(p) => Ok((train, Dataset::read_csv(p, "csv_test")?)),
                    None => split(train),
                }
            }
        }
    }

    pub fn multiscale_params(&self) -> MultiScaleParams {
        let d = &self.dataset;
        MultiScaleParams { periods: d.periods, noise_halfwidth: d.noise_halfwidth, low: d.low, high: d.high }
    }

    /// Default input-reset monitors for multi-scale streams.
    pub fn multiscale_monitors() -> Vec<Vec<usize>> {
        MultiScaleStream::subcomponent_map()
    }
}

/// One run of a config: its curve and end-of-training error.
#[derive(Debug, Clone)]
pub struct ConfigRun {
    pub curve: TrainCurve,
    pub end_error: f64,
    pub end_accuracy: Option<f64>,
}

pub fn run_once(cfg: &RunConfig, train: &Dataset, test: &Dataset, seed: u64, run: usize) -> Result<ConfigRun> {
    let condition = cfg.train_condition()?;
    let schedule = match condition {
        Condition::Sequential => Schedule::sequential(train),
        c => Session::new(train, derive_seed(seed, 13))?.schedule(train, c)?,
    };
    let eval_mode = match cfg.test_condition()? {
        None => EvalMode::Stateless,
        Some(Condition::Sequential) => EvalMode::Ordered((0..test.len()).collect()),
        Some(c) => EvalMode::Ordered(ordered_test_schedule(test, c, seed, cfg.test_same_cycle()?)?.order),
    };
    let tc = TrainConfig {
        epochs: cfg.training.epochs,
        eval_every: cfg.training.eval_every,
        eval_mode,
        batch_size: cfg.training.batch_size,
        ..Default::default()
    };
    let curve = match cfg.model.kind {
        ModelKind::Leaky => {
            let spec = cfg.model_spec(train)?;
            let state = ModelState::init(&spec, &mut Rng::new(seed).derive(12))?;
            if tc.batch_size == 1 {
                train_incremental(&spec, state, train, &schedule, test, &cfg.optimizer, &tc, run)?.curve
            } else {
                train_minibatch(&spec, state, train, &schedule, test, &cfg.optimizer, &tc, run)?.curve
            }
        }
        ModelKind::Lstm => {
            let spec = cfg.lstm_spec(train)?;
            let state = LstmState::init(&spec, &mut Rng::new(seed).derive(15))?;
            train_lstm(&spec, state, train, &schedule, test, &cfg.optimizer, &tc, run)?.curve
        }
    };
    let (end_error, end_accuracy) = end_of_training(&curve, cfg.training.end_window)?;
    Ok(ConfigRun { curve, end_error, end_accuracy })
}

/// Runs every configured run and writes `curves.csv` and `summary.csv`
/// under `out_dir`; returns the written paths.
pub fn run_config(cfg: &RunConfig, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (train, test) = cfg.datasets(seed)?;
    let runs = par_map(cfg.training.runs, |r| run_once(cfg, &train, &test, run_seed(seed, r), r));
    let mut curve = TrainCurve::default();
    let mut rows = Vec::new();
    for (r, res) in runs.into_iter().enumerate() {
        let res = res?;
        rows.push([
            r.to_string(),
            res.end_error.to_string(),
            res.end_accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ]);
        curve.extend(res.curve);
    }
    let curves = out_dir.join("curves.csv");
    curve.write_csv(&curves)?;
    let summary = out_dir.join("summary.csv");
    crate::experiments::write_rows(&summary, &["run", "end_error", "end_accuracy"], &rows)?;
    Ok(vec![curves, summary])
}

/// Writes the generated train/test sets and the training schedule of run 0.
pub fn generate(cfg: &RunConfig, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (train, test) = cfg.datasets(seed)?;
    let paths = [out_dir.join("train.csv"), out_dir.join("test.csv"), out_dir.join("schedule.csv")];
    train.write_csv(&paths[0])?;
    test.write_csv(&paths[1])?;
    let schedule = match cfg.train_condition()? {
        Condition::Sequential => Schedule::sequential(&train),
        c => Session::new(&train, derive_seed(run_seed(seed, 0), 13))?.schedule(&train, c)?,
    };
    schedule.write_csv(&train, &paths[2])?;
    Ok(paths.to_vec())
}
