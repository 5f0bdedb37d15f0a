//! Experiment configuration: a flat `key = value` file (TOML syntax, no
//! tables). Every key is optional; see `ExperimentConfig::default` for the
//! defaults and `crates/cli/examples/experiment.toml` for a commented
//! template.

use std::path::{Path, PathBuf};

use sclc_bench::LatencyModel;
use sclc_core::distill::TrainConfig;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Cifar10,
    Mnist,
}

/// Student architecture trained by `train-student` and `gridsearch`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudentArch {
    /// Linear counterpart with spectral pooling.
    Sclc,
    /// Linear counterpart with max pooling between spectral blocks.
    SclcMaxpool,
    /// The teacher layout with square nonlinearities.
    Square,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetName,
    /// Dataset root; empty means the `DATA_DIR` environment variable.
    pub data_dir: String,
    pub train_size: usize,
    pub test_size: usize,
    /// Input side every training command resamples to.
    pub side: usize,
    pub resolutions: Vec<usize>,
    /// Seeds averaged by `ablate` and `sweep-resolution`.
    pub seeds: Vec<u64>,
    pub seed: u64,
    pub out_dir: String,
    /// Teacher parameter file; empty means `<out_dir>/teacher.sclp`.
    pub teacher_checkpoint: String,
    pub student_arch: StudentArch,
    /// Start the student's dense layer from the teacher's.
    pub teacher_init_backend: bool,

    pub batch_size: usize,
    pub teacher_epochs: usize,
    pub teacher_lr: f64,
    pub teacher_momentum: f64,
    pub teacher_weight_decay: f64,
    pub student_epochs: usize,
    pub student_lr: f64,
    pub student_momentum: f64,
    pub student_weight_decay: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub t_squared_scaling: bool,

    pub grid_alphas: Vec<f64>,
    pub grid_temperatures: Vec<f64>,

    pub bench_sides: Vec<usize>,
    pub bench_kernels: Vec<usize>,
    pub bench_reps: usize,
    pub bench_include_fft: bool,

    pub payload_bytes: f64,
    pub link_rate_bits_per_s: f64,
    pub backend_ms: f64,
    pub optical_ms: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let latency = LatencyModel::reference();
        let train = TrainConfig::default();
        ExperimentConfig {
            dataset: DatasetName::Cifar10,
            data_dir: String::new(),
            train_size: 10_000,
            test_size: 2_000,
            side: 32,
            resolutions: vec![8, 16, 32],
            seeds: vec![0, 1, 2],
            seed: 0,
            out_dir: "out".into(),
            teacher_checkpoint: String::new(),
            student_arch: StudentArch::Sclc,
            teacher_init_backend: false,
            batch_size: train.batch_size,
            teacher_epochs: 20,
            teacher_lr: 0.01,
            teacher_momentum: train.momentum,
            teacher_weight_decay: train.weight_decay,
            student_epochs: 20,
            student_lr: train.lr,
            student_momentum: train.momentum,
            student_weight_decay: train.weight_decay,
            alpha: train.alpha,
            temperature: train.temperature,
            t_squared_scaling: train.t_squared_scaling,
            grid_alphas: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            grid_temperatures: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            bench_sides: vec![64, 128, 256, 512, 1024],
            bench_kernels: vec![3, 11],
            bench_reps: 5,
            bench_include_fft: false,
            payload_bytes: latency.payload_bytes,
            link_rate_bits_per_s: latency.link_rate_bits_per_s,
            backend_ms: latency.backend_ms,
            optical_ms: latency.optical_ms,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let pow2 = |what: &str, v: &[usize]| match v.iter().find(|s| !s.is_power_of_two()) {
            Some(bad) => Err(CliError::Config(format!("{what} entry {bad} is not a power of two"))),
            None => Ok(()),
        };
        pow2("side", &[self.side])?;
        pow2("resolutions", &self.resolutions)?;
        pow2("bench_sides", &self.bench_sides)?;
        if self.side < 8 || self.resolutions.iter().any(|&r| r < 8) {
            return Err(CliError::Config("input sides must be at least 8".into()));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(CliError::Config("train_size and test_size must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        self.teacher_train().validate()?;
        self.student_train().validate()?;
        for &alpha in &self.grid_alphas {
            TrainConfig {
                alpha,
                ..self.student_train()
            }
            .validate()?;
        }
        for &temperature in &self.grid_temperatures {
            TrainConfig {
                temperature,
                ..self.student_train()
            }
            .validate()?;
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ExperimentConfig { seed, ..self.clone() }
    }

    pub fn data_root(&self) -> Result<PathBuf, CliError> {
        if !self.data_dir.is_empty() {
            return Ok(PathBuf::from(&self.data_dir));
        }
        std::env::var_os("DATA_DIR")
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Config("no dataset root: set data_dir in the config or DATA_DIR".into()))
    }

    pub fn out_path(&self) -> PathBuf {
        PathBuf::from(&self.out_dir)
    }

    pub fn teacher_path(&self) -> PathBuf {
        if self.teacher_checkpoint.is_empty() {
            self.out_path().join("teacher.sclp")
        } else {
            PathBuf::from(&self.teacher_checkpoint)
        }
    }

    pub fn teacher_train(&self) -> TrainConfig {
        TrainConfig {
            alpha: 1.0,
            temperature: 1.0,
            lr: self.teacher_lr,
            momentum: self.teacher_momentum,
            weight_decay: self.teacher_weight_decay,
            batch_size: self.batch_size,
            epochs: self.teacher_epochs,
            seed: self.seed,
            t_squared_scaling: false,
        }
    }

    pub fn student_train(&self) -> TrainConfig {
        TrainConfig {
            alpha: self.alpha,
            temperature: self.temperature,
            lr: self.student_lr,
            momentum: self.student_momentum,
            weight_decay: self.student_weight_decay,
            batch_size: self.batch_size,
            epochs: self.student_epochs,
            seed: self.seed,
            t_squared_scaling: self.t_squared_scaling,
        }
    }

    pub fn latency_model(&self) -> LatencyModel {
        LatencyModel {
            payload_bytes: self.payload_bytes,
            link_rate_bits_per_s: self.link_rate_bits_per_s,
            backend_ms: self.backend_ms,
            optical_ms: self.optical_ms,
        }
    }
}
