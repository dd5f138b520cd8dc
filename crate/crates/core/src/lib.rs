//! Incremental learning from temporally smooth data streams.
//!
//! Sampling schedules that control how often consecutive training samples
//! share a category, feedforward and leaky-memory networks trained one sample
//! at a time, an LSTM baseline trained with truncated BPTT, and the metrics
//! and experiment presets built on top of them.

pub mod checkpoint;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiments;
pub mod lstm;
pub mod metrics;
pub mod models;
pub mod numerics;
pub mod optim;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
