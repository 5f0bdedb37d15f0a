use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclc_core::fft::{fft2, ifft2};
use sclc_core::layers::{
    max_pool_forward, spatial_conv_forward, spectral_pool_forward, Activation, ConvMode, SpectralConvLayer,
    SpectralPoolLayer,
};
use sclc_core::tensor::real_part;
use sclc_core::{RealTensor4, Shape4};

use crate::{BenchError, Result};

pub const WARMUP_RUNS: usize = 3;
pub const MIN_REPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    SpatialConv,
    SpectralConv,
    MaxPool,
    SpectralPool,
}

impl LayerKind {
    pub const ALL: [LayerKind; 4] = [
        LayerKind::SpatialConv,
        LayerKind::SpectralConv,
        LayerKind::MaxPool,
        LayerKind::SpectralPool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::SpatialConv => "spatial_conv",
            LayerKind::SpectralConv => "spectral_conv",
            LayerKind::MaxPool => "max_pool",
            LayerKind::SpectralPool => "spectral_pool",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        LayerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown layer kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub kind: LayerKind,
    pub side: usize,
    pub kernel: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub mad_ms: f64,
    /// The inputs could not be allocated; timings are NaN.
    pub skipped: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub const CSV_HEADER: &'static str = "kind,side,kernel,reps,median_ms,mad_ms";

    pub fn extend(&mut self, other: TimingTable) {
        self.rows.extend(other.rows);
    }

    /// Measured (not skipped) rows of one kind, in table order.
    pub fn measured(&self, kind: LayerKind) -> impl Iterator<Item = &TimingRow> {
        self.rows.iter().filter(move |r| r.kind == kind && !r.skipped)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let (m, d) = if r.skipped {
                ("skipped".to_string(), "skipped".to_string())
            } else {
                (format!("{:.6}", r.median_ms), format!("{:.6}", r.mad_ms))
            };
            out.push_str(&format!("{},{},{},{},{m},{d}\n", r.kind, r.side, r.kernel, r.reps));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeOptions {
    pub reps: usize,
    pub seed: u64,
    /// Count the input FFT and the output inverse FFT in the spectral
    /// timings, for end-to-end comparisons.
    pub include_input_fft: bool,
}

impl Default for TimeOptions {
    fn default() -> Self {
        TimeOptions {
            reps: MIN_REPS,
            seed: 0,
            include_input_fft: false,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    median(&values.iter().map(|v| (v - m).abs()).collect::<Vec<_>>())
}

/// Times one layer kind at each side length, single-threaded, returning one
/// row per side.
pub fn time_layer(kind: LayerKind, sides: &[usize], kernel: usize, reps: usize) -> Result<TimingTable> {
    time_layer_with(
        kind,
        sides,
        kernel,
        &TimeOptions {
            reps,
            ..TimeOptions::default()
        },
    )
}

pub fn time_layer_with(kind: LayerKind, sides: &[usize], kernel: usize, opts: &TimeOptions) -> Result<TimingTable> {
    if sclc_core::distill::training_active() {
        return Err(BenchError::TrainingActive);
    }
    if opts.reps < MIN_REPS {
        return Err(BenchError::Config(format!(
            "reps must be at least {MIN_REPS}, got {}",
            opts.reps
        )));
    }
    if let Some(&bad) = sides.iter().find(|s| !s.is_power_of_two() || **s < 2) {
        return Err(BenchError::Config(format!(
            "side length {bad} is not a power of two ≥ 2"
        )));
    }
    let mut table = TimingTable::default();
    for &side in sides {
        if matches!(kind, LayerKind::SpatialConv | LayerKind::SpectralConv) && (kernel == 0 || kernel > side) {
            return Err(BenchError::Config(format!(
                "kernel {kernel} does not fit a {side}×{side} input"
            )));
        }
        let row = match measure(kind, side, kernel, opts)? {
            Some(samples) => TimingRow {
                kind,
                side,
                kernel,
                reps: opts.reps,
                median_ms: median(&samples),
                mad_ms: mad(&samples),
                skipped: false,
            },
            None => TimingRow {
                kind,
                side,
                kernel,
                reps: opts.reps,
                median_ms: f64::NAN,
                mad_ms: f64::NAN,
                skipped: true,
            },
        };
        table.rows.push(row);
    }
    Ok(table)
}

/// Confirms the working set can be allocated before building inputs.
fn can_allocate(side: usize) -> bool {
    // input, padded kernel and output spectra plus scratch, complex f64
    let bytes = side.checked_mul(side).and_then(|n| n.checked_mul(16 * 6));
    let Some(bytes) = bytes else { return false };
    let mut probe: Vec<u8> = Vec::new();
    probe.try_reserve_exact(bytes).is_ok()
}

fn samples(reps: usize, mut op: impl FnMut() -> sclc_core::Result<()>) -> Result<Vec<f64>> {
    for _ in 0..WARMUP_RUNS {
        op()?;
    }
    let mut out = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        op()?;
        out.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(out)
}

fn measure(kind: LayerKind, side: usize, kernel: usize, opts: &TimeOptions) -> Result<Option<Vec<f64>>> {
    if !can_allocate(side) {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (side as u64) << 8 ^ kernel as u64);
    let mut random = |shape| RealTensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0));
    let x = random(Shape4::new(1, 1, side, side));
    let k = random(Shape4::new(1, 1, kernel.max(1), kernel.max(1)));
    let e2e = opts.include_input_fft;
    let reps = opts.reps;
    let times = match kind {
        LayerKind::SpatialConv => samples(reps, || spatial_conv_forward(&k, &x, ConvMode::ZeroPad).map(drop))?,
        LayerKind::SpectralConv => {
            let xs = fft2(&x)?;
            samples(reps, || {
                // the kernel transform is part of the layer cost
                let layer = SpectralConvLayer::new(k.clone(), (side, side))?;
                if e2e {
                    let y = layer.forward(&fft2(&x)?)?;
                    drop(real_part(&ifft2(&y)?));
                } else {
                    drop(layer.forward(&xs)?);
                }
                Ok(())
            })?
        }
        LayerKind::MaxPool => samples(reps, || max_pool_forward(&x, 2, 2).map(drop))?,
        LayerKind::SpectralPool => {
            let layer = SpectralPoolLayer::new(side / 2, side / 2);
            let xs = Activation::Spectral(fft2(&x)?);
            samples(reps, || {
                if e2e {
                    let y = spectral_pool_forward(&layer, &Activation::Spectral(fft2(&x)?))?;
                    if let Activation::Spectral(y) = y {
                        drop(real_part(&ifft2(&y)?));
                    }
                } else {
                    drop(spectral_pool_forward(&layer, &xs)?);
                }
                Ok(())
            })?
        }
    };
    Ok(Some(times))
}
