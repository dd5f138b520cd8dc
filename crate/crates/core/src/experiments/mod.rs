//! Named, seed-determined experiment presets and their CSV outputs.
//!
//! Every preset writes into its output directory:
//! - `curves_<model>_<condition>.csv`: `run,condition,iteration,samples_seen,train_loss,test_loss,test_acc`
//! - `summary.csv`: `model,condition,runs,mean_end_error,boot_mean,boot_std`
//! - `end_errors.csv`: `model,condition,run,end_error`
//! - `checks.csv`: `check,passed,detail`
//!
//! Autoencoder presets add `selectivity.csv` and `per_feature.csv`.

pub mod presets;
pub mod protocol;

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::BootstrapSummary;
use crate::numerics::derive_seed;

pub use protocol::ConditionSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::invalid(format!("unknown scale `{s}` (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetContext {
    pub master_seed: u64,
    pub scale: Scale,
    pub out_dir: PathBuf,
    /// Directory holding the four MNIST IDX files; MNIST checks are
    /// skipped without it.
    pub mnist_dir: Option<PathBuf>,
    /// Overrides the preset's run count.
    pub runs: Option<usize>,
}

impl PresetContext {
    pub fn new(master_seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self { master_seed, scale: Scale::Desk, out_dir: out_dir.into(), mnist_dir: None, runs: None }
    }

    pub fn runs_or(&self, default: usize) -> usize {
        self.runs.unwrap_or(default).max(1)
    }

    /// Stream seed for a named part of a preset.
    pub fn seed_for(&self, part: u64) -> u64 {
        derive_seed(self.master_seed, part)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetReport {
    pub id: String,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

impl PresetReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            format!("PASS {} ({} checks)", self.id, self.checks.len())
        } else {
            format!("FAIL {} ({}/{} checks failed: {})", self.id, failed.len(), self.checks.len(), failed.join(", "))
        }
    }
}

pub struct PresetInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub run: fn(&PresetContext) -> Result<PresetReport>,
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo { id: "fig2a", description: "feedforward classifier across smoothness levels", run: presets::fig2a },
    PresetInfo { id: "fig2b", description: "leaky memory (alpha 0.5) without reset", run: presets::fig2b },
    PresetInfo {
        id: "fig2c",
        description: "leaky memory with label reset vs feedforward, plus stateless transfer",
        run: presets::fig2c,
    },
    PresetInfo {
        id: "fig3",
        description: "multi-scale autoencoders: error and timescale selectivity",
        run: presets::fig3,
    },
    PresetInfo { id: "a1", description: "classification vs reconstruction under smoothness", run: presets::a1 },
    PresetInfo { id: "a3", description: "feedforward smoothness ordering under cross-entropy", run: presets::a3 },
    PresetInfo { id: "a4", description: "leaky and leaky+reset at exemplar noise 0.5 and 0.7", run: presets::a4 },
    PresetInfo { id: "a5", description: "mini-batch order invariance vs leaky memory", run: presets::a5 },
    PresetInfo { id: "a6", description: "batch 16 with 10/16/24 repetitions", run: presets::a6 },
    PresetInfo { id: "a7", description: "non-overlapping stream where memory hurts", run: presets::a7 },
    PresetInfo {
        id: "a9",
        description: "LSTM vs leaky+reset over 5 epochs, tested on the training stream structure",
        run: presets::a9,
    },
    PresetInfo {
        id: "a10",
        description: "LSTM vs leaky+reset, trained on 5-rep and tested on 1-rep",
        run: presets::a10,
    },
    PresetInfo {
        id: "a12",
        description: "multi-scale autoencoders at another learning rate and dataset",
        run: presets::a12,
    },
    PresetInfo { id: "a13", description: "per-timescale reconstruction error", run: presets::a13 },
    PresetInfo { id: "a14", description: "fast-feature interference from memory units", run: presets::a14 },
];

pub fn find_preset(id: &str) -> Result<&'static PresetInfo> {
    PRESETS.iter().find(|p| p.id == id).ok_or_else(|| Error::UnknownPreset(id.to_string()))
}

/// Runs a preset and writes its CSVs and `checks.csv` under `ctx.out_dir`.
pub fn run_preset(id: &str, ctx: &PresetContext) -> Result<PresetReport> {
    let preset = find_preset(id)?;
    fs::create_dir_all(&ctx.out_dir).map_err(|e| Error::io(&ctx.out_dir, e))?;
    let mut report = (preset.run)(ctx)?;
    let path = ctx.out_dir.join("checks.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["check", "passed", "detail"])?;
    for c in &report.checks {
        w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, c.detail.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    report.files.push(path);
    Ok(report)
}

/// Accumulates the per-condition outputs of a preset.
pub(crate) struct Outputs<'a> {
    dir: &'a Path,
    summary: Vec<[String; 6]>,
    end_errors: Vec<[String; 4]>,
    pub files: Vec<PathBuf>,
    boot_seed: u64,
}

impl<'a> Outputs<'a> {
    pub fn new(ctx: &'a PresetContext) -> Self {
        Self {
            dir: &ctx.out_dir,
            summary: Vec::new(),
            end_errors: Vec::new(),
            files: Vec::new(),
            boot_seed: ctx.seed_for(900),
        }
    }

    pub fn dir(&self) -> &Path {
        self.dir
    }

    /// Writes the condition's curves and returns its bootstrap summary.
    pub fn add(&mut self, model: &str, s: &ConditionSummary) -> Result<BootstrapSummary> {
        let cond = s.condition.to_string();
        self.add_values(model, &cond, &s.end_errors, Some(&s.curve))
    }

    pub fn add_values(
        &mut self,
        model: &str,
        condition: &str,
        end_errors: &[f64],
        curve: Option<&crate::training::TrainCurve>,
    ) -> Result<BootstrapSummary> {
        if let Some(curve) = curve {
            let path = self.dir.join(format!("curves_{model}_{condition}.csv"));
            curve.write_csv(&path)?;
            self.files.push(path);
        }
        self.boot_seed = derive_seed(self.boot_seed, 1);
        let boot = crate::metrics::bootstrap_mean_std(
            end_errors,
            protocol::BOOTSTRAPS,
            end_errors.len(),
            &mut crate::numerics::Rng::new(self.boot_seed),
        )?;
        let mean = end_errors.iter().sum::<f64>() / end_errors.len() as f64;
        self.summary.push([
            model.to_string(),
            condition.to_string(),
            end_errors.len().to_string(),
            mean.to_string(),
            boot.mean.to_string(),
            boot.std.to_string(),
        ]);
        for (r, e) in end_errors.iter().enumerate() {
            self.end_errors.push([model.to_string(), condition.to_string(), r.to_string(), e.to_string()]);
        }
        Ok(boot)
    }

    pub fn finish(mut self, id: &str, checks: Vec<Check>) -> Result<PresetReport> {
        let path = self.dir.join("summary.csv");
        write_rows(&path, &["model", "condition", "runs", "mean_end_error", "boot_mean", "boot_std"], &self.summary)?;
        self.files.push(path);
        let path = self.dir.join("end_errors.csv");
        write_rows(&path, &["model", "condition", "run", "end_error"], &self.end_errors)?;
        self.files.push(path);
        Ok(PresetReport { id: id.to_string(), checks, files: self.files })
    }
}

pub(crate) fn write_rows<R: AsRef<[String]>>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
