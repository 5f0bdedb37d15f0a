use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use sclc_cli::{run, Command, ExperimentConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    TrainTeacher,
    TrainStudent,
    Ablate,
    SweepResolution,
    Bench,
    Latency,
    Gridsearch,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::TrainTeacher => Command::TrainTeacher,
            Cmd::TrainStudent => Command::TrainStudent,
            Cmd::Ablate => Command::Ablate,
            Cmd::SweepResolution => Command::SweepResolution,
            Cmd::Bench => Command::Bench,
            Cmd::Latency => Command::Latency,
            Cmd::Gridsearch => Command::Gridsearch,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Spectral linear-counterpart CNN experiments.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Experiment config file (flat key = value); defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    cmd: Cmd,
    /// Knowledge distillation for train-student.
    #[arg(long, value_enum, default_value = "on")]
    kd: Switch,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.to_string_lossy().into_owned();
    }
    let cmd = Command::from(args.cmd);
    let outcome = run(cmd, &cfg, matches!(args.kd, Switch::On)).with_context(|| format!("{} failed", cmd.name()))?;
    for file in &outcome.files {
        println!("{}", file.display());
    }
    Ok(())
}
