//! Shared fixtures: a small synthetic dataset in the CIFAR-10 binary
//! layout and a matching experiment config.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclc_cli::data::{CIFAR_CHANNELS, CIFAR_RECORD_LEN, CIFAR_SIDE, CIFAR_SUBDIR, CIFAR_TEST_FILE, CIFAR_TRAIN_FILES};
use sclc_cli::ExperimentConfig;

/// One record: a class-specific oriented grating per channel plus uniform
/// noise, so the classes are learnable but not trivially separable.
pub fn synthetic_record(label: u8, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let l = label as f64;
    let (fx, fy) = (1.0 + (label % 3) as f64, 1.0 + (label / 3) as f64);
    let mut rec = Vec::with_capacity(CIFAR_RECORD_LEN);
    rec.push(label);
    for ch in 0..CIFAR_CHANNELS {
        for y in 0..CIFAR_SIDE {
            for x in 0..CIFAR_SIDE {
                let phase = 2.0 * PI * (fx * x as f64 + fy * y as f64) / CIFAR_SIDE as f64 + 0.7 * l + ch as f64;
                let v = 0.5 + 0.3 * phase.sin() + rng.gen_range(-0.2..0.2);
                rec.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    rec
}

fn write_batch(path: &Path, count: usize, rng: &mut ChaCha8Rng) {
    let mut bytes = Vec::with_capacity(count * CIFAR_RECORD_LEN);
    for i in 0..count {
        bytes.extend(synthetic_record((i % 10) as u8, rng));
    }
    fs::write(path, bytes).unwrap();
}

/// Writes five training batches of `per_batch` records and a test batch of
/// `test` records under `root/cifar-10-batches-bin`.
pub fn write_synthetic_cifar(root: &Path, per_batch: usize, test: usize, seed: u64) {
    let dir = root.join(CIFAR_SUBDIR);
    fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in CIFAR_TRAIN_FILES {
        write_batch(&dir.join(name), per_batch, &mut rng);
    }
    write_batch(&dir.join(CIFAR_TEST_FILE), test, &mut rng);
}

/// A config small enough for unit-test budgets: side 8, a handful of
/// samples and one or two epochs.
pub fn tiny_config(data: &Path, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        data_dir: data.to_string_lossy().into_owned(),
        out_dir: out.to_string_lossy().into_owned(),
        train_size: 40,
        test_size: 20,
        side: 8,
        resolutions: vec![8, 16],
        seeds: vec![0, 1],
        teacher_epochs: 2,
        student_epochs: 1,
        grid_alphas: vec![0.5],
        grid_temperatures: vec![2.0, 4.0],
        bench_sides: vec![8, 16],
        bench_kernels: vec![3],
        ..ExperimentConfig::default()
    }
}

/// Drops the `wall_ms` column (the last one) from a training-history CSV.
pub fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}
