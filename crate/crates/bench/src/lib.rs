//! Layer runtime measurement, log-log scaling fits, spatial/spectral
//! crossover detection and the analytic optical latency model.

mod fit;
mod latency;
mod report;
mod timing;

pub use fit::{crossover_size, fit_loglog_slope, MIN_FIT_ROWS};
pub use latency::{latency_estimate, LatencyBreakdown, LatencyModel};
pub use report::{summary_markdown, ScalingSummary};
pub use timing::{
    mad, median, time_layer, time_layer_with, LayerKind, TimeOptions, TimingRow, TimingTable, MIN_REPS, WARMUP_RUNS,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] sclc_core::Error),
    #[error("invalid benchmark request: {0}")]
    Config(String),
    #[error("refusing to time layers while a training run is active in this process")]
    TrainingActive,
    #[error("{kind}: {rows} measured rows, the fit needs at least {needed}")]
    InsufficientRows {
        kind: &'static str,
        rows: usize,
        needed: usize,
    },
    #[error("timing tables have no side length in common")]
    DisjointGrids,
    #[error("link rate must be positive")]
    ZeroLinkRate,
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
