//! Incremental SGD, RMSprop with momentum, and mini-batch gradient averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named flat parameter (or gradient) tensors, in a fixed order.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<(&'static str, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Momentum decay. 0 gives plain RMSprop.
    pub beta1: f64,
    /// Squared-gradient decay.
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Sgd, learning_rate: 0.01, beta1: 0.9, beta2: 0.99, epsilon: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, learning_rate, ..Self::default() }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Rmsprop, learning_rate, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} {b} outside [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be > 0"));
        }
        Ok(())
    }
}

/// `param ← param − lr · grad`
pub fn sgd_step(learning_rate: f64, params: &mut [f64], grads: &[f64]) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= learning_rate * g;
    }
}

/// One RMSprop-with-momentum update over a tensor:
///
/// ```text
/// v ← β2·v + (1−β2)·g²
/// m ← β1·m + (1−β1)·g / (√v + ε)
/// p ← p − lr·m
/// ```
pub fn rmsprop_step(
    cfg: &OptimizerConfig,
    params: &mut [f64],
    grads: &[f64],
    momentum: &mut [f64],
    second_moment: &mut [f64],
) {
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(momentum.iter_mut()).zip(second_moment.iter_mut()) {
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g / (v.sqrt() + cfg.epsilon);
        *p -= cfg.learning_rate * *m;
    }
}

/// Optimizer with per-tensor accumulators, created lazily on first step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    momentum: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, momentum: Vec::new(), second_moment: Vec::new() })
    }

    pub fn momentum(&self) -> &[Vec<f64>] {
        &self.momentum
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Applies one update. Shapes and finiteness are checked for every
    /// tensor before any parameter is touched.
    pub fn step<P: ParamTensors + ?Sized, G: ParamTensors + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &G,
    ) -> Result<()> {
        let grads = grads.tensors();
        let mut params = params.tensors_mut();
        if grads.len() != params.len() {
            return Err(Error::invalid(format!(
                "{} gradient tensors for {} parameter tensors",
                grads.len(),
                params.len()
            )));
        }
        for ((pname, p), (gname, g)) in params.iter().zip(&grads) {
            if pname != gname || p.len() != g.len() {
                return Err(Error::invalid(format!(
                    "gradient `{gname}` ({}) does not match parameter `{pname}` ({})",
                    g.len(),
                    p.len()
                )));
            }
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient `{gname}`[{i}]")));
            }
        }
        match self.config.kind {
            OptimizerKind::Sgd => {
                for ((_, p), (_, g)) in params.iter_mut().zip(&grads) {
                    sgd_step(self.config.learning_rate, p, g);
                }
            }
            OptimizerKind::Rmsprop => {
                if self.momentum.len() != params.len() {
                    self.momentum = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
                    self.second_moment = self.momentum.clone();
                }
                for (i, ((_, p), (_, g))) in params.iter_mut().zip(&grads).enumerate() {
                    rmsprop_step(&self.config, p, g, &mut self.momentum[i], &mut self.second_moment[i]);
                }
            }
        }
        Ok(())
    }
}

/// Collects per-sample gradients and averages them on flush.
///
/// The mean of each element is summed in sorted order, so the flushed
/// value depends only on the multiset of accumulated gradients and not on
/// the order they arrived in.
#[derive(Debug, Clone, Default)]
pub struct GradientAccumulator {
    samples: Vec<Vec<Vec<f64>>>,
}

impl GradientAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push<G: ParamTensors + ?Sized>(&mut self, grads: &G) {
        self.samples.push(grads.tensors().into_iter().map(|(_, t)| t.to_vec()).collect());
    }

    /// Writes the elementwise mean into `out` and clears the accumulator.
    pub fn flush_into<G: ParamTensors + ?Sized>(&mut self, out: &mut G) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::invalid("flush on an empty gradient accumulator"));
        }
        let count = self.samples.len();
        let mut column = vec![0.0; count];
        for (t, (name, dst)) in out.tensors_mut().into_iter().enumerate() {
            for (e, d) in dst.iter_mut().enumerate() {
                for (s, slot) in self.samples.iter().zip(column.iter_mut()) {
                    *slot = *s
                        .get(t)
                        .and_then(|tensor| tensor.get(e))
                        .ok_or_else(|| Error::invalid(format!("accumulated gradient lacks `{name}`[{e}]")))?;
                }
                column.sort_unstable_by(f64::total_cmp);
                *d = column.iter().sum::<f64>() / count as f64;
            }
        }
        self.samples.clear();
        Ok(())
    }
}

/// A single named tensor; handy for tests and one-off updates.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: &'static str,
    pub data: Vec<f64>,
}

impl ParamTensors for Tensor {
    fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        vec![(self.name, &self.data)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![(self.name, &mut self.data)]
    }
}
