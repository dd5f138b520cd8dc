use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tempolearn::config::{generate, run_config, RunConfig};
use tempolearn::experiments::{run_preset, PresetContext, Scale, PRESETS};

#[derive(Parser)]
#[command(name = "tempolearn", version, about = "Learning from temporally smooth data streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "TEMPOLEARN_OUT", default_value = "tempolearn-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write the train/test sets and training schedule described by a config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the model described by a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named experiment preset; CSVs go to `<out>/<preset>/`.
    Run {
        preset: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "desk")]
        scale: Scale,
        /// Directory with the MNIST IDX files.
        #[arg(long, env = "TEMPOLEARN_MNIST")]
        mnist: Option<PathBuf>,
        /// Override the preset's number of runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// List preset ids.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> tempolearn::Result<bool> {
    match command {
        Command::Generate { config, common } => {
            let cfg = RunConfig::load(&config)?;
            for p in generate(&cfg, common.seed.unwrap_or(cfg.training.seed), &common.out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Train { config, common } => {
            let cfg = RunConfig::load(&config)?;
            for p in run_config(&cfg, common.seed.unwrap_or(cfg.training.seed), &common.out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
        Command::Run { preset, common, scale, mnist, runs } => {
            let ctx = PresetContext {
                master_seed: common.seed.unwrap_or(1),
                scale,
                out_dir: common.out.join(&preset),
                mnist_dir: mnist,
                runs,
            };
            let report = run_preset(&preset, &ctx)?;
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            println!("{}", report.summary_line());
            Ok(report.passed())
        }
        Command::ListPresets => {
            for p in PRESETS {
                println!("{:<6} {}", p.id, p.description);
            }
            Ok(true)
        }
    }
}
