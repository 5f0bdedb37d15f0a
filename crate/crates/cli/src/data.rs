//! Dataset loaders for the MNIST IDX and CIFAR-10 binary layouts, plus
//! power-of-two resampling.
//!
//! Pixels are divided by 255 and never standardized. MNIST digits are
//! zero-padded from 28×28 to 32×32 (two pixels on each side) so every
//! input takes the radix-2 path.

use std::fs;
use std::path::{Path, PathBuf};

use sclc_core::dataset::{Dataset, Split};
use sclc_core::{RealTensor4, Shape4};

use crate::error::CliError;

pub const MNIST_IMAGE_MAGIC: u32 = 2051;
pub const MNIST_LABEL_MAGIC: u32 = 2049;
pub const MNIST_SIDE: usize = 28;
pub const MNIST_PADDED_SIDE: usize = 32;

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_CHANNELS: usize = 3;
pub const CIFAR_RECORD_LEN: usize = 1 + CIFAR_CHANNELS * CIFAR_SIDE * CIFAR_SIDE;
pub const CIFAR_CLASSES: usize = 10;
pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";
pub const CIFAR_SUBDIR: &str = "cifar-10-batches-bin";

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn read_file(path: &Path, hint: &str) -> Result<Vec<u8>, CliError> {
    if !path.is_file() {
        return Err(CliError::MissingFile {
            path: path.to_path_buf(),
            hint: hint.to_string(),
        });
    }
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, CliError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            format_err(
                path,
                bytes.len() as u64,
                format!("file ends inside the header field at byte {offset}"),
            )
        })
}

/// First directory among `root/name` and `root` holding `probe`.
fn locate(root: &Path, name: &str, probe: &str) -> PathBuf {
    let nested = root.join(name);
    if nested.join(probe).is_file() {
        nested
    } else {
        root.to_path_buf()
    }
}

/// Parses an IDX image file (magic 2051) into `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, usize, Vec<u8>), CliError> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != MNIST_IMAGE_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("image magic {magic}, expected {MNIST_IMAGE_MAGIC}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    let rows = be_u32(bytes, 8, path)? as usize;
    let cols = be_u32(bytes, 12, path)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_add(16))
        .ok_or_else(|| format_err(path, 4, "image dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(format_err(
            path,
            bytes.len().min(expected) as u64,
            format!(
                "{count} images of {rows}×{cols} need {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    Ok((count, rows, cols, bytes[16..].to_vec()))
}

/// Parses an IDX label file (magic 2049).
pub fn parse_idx_labels(bytes: &[u8], path: &Path, class_count: usize) -> Result<Vec<usize>, CliError> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != MNIST_LABEL_MAGIC {
        return Err(format_err(
            path,
            0,
            format!("label magic {magic}, expected {MNIST_LABEL_MAGIC}"),
        ));
    }
    let count = be_u32(bytes, 4, path)? as usize;
    if bytes.len() != 8 + count {
        return Err(format_err(
            path,
            bytes.len().min(8 + count) as u64,
            format!("{count} labels need {} bytes, file has {}", 8 + count, bytes.len()),
        ));
    }
    bytes[8..]
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if (l as usize) < class_count {
                Ok(l as usize)
            } else {
                Err(format_err(
                    path,
                    8 + i as u64,
                    format!("label {l} is not below {class_count}"),
                ))
            }
        })
        .collect()
}

/// Loads up to `limit` MNIST samples from the standard IDX files in `dir`
/// (or `dir/mnist`), zero-padding each digit to 32×32.
pub fn load_mnist(dir: &Path, split: Split, limit: Option<usize>) -> Result<Dataset, CliError> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let image_name = format!("{prefix}-images-idx3-ubyte");
    let dir = locate(dir, "mnist", &image_name);
    let hint = "place the uncompressed MNIST IDX files there or set DATA_DIR";
    let image_path = dir.join(&image_name);
    let label_path = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    let (count, rows, cols, pixels) = parse_idx_images(&read_file(&image_path, hint)?, &image_path)?;
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(format_err(
            &image_path,
            8,
            format!("images are {rows}×{cols}, expected 28×28"),
        ));
    }
    let labels = parse_idx_labels(&read_file(&label_path, hint)?, &label_path, 10)?;
    if labels.len() != count {
        return Err(format_err(
            &label_path,
            4,
            format!("{} labels for {count} images", labels.len()),
        ));
    }
    let n = limit.map_or(count, |l| l.min(count));
    let pad = (MNIST_PADDED_SIDE - MNIST_SIDE) / 2;
    let plane = MNIST_SIDE * MNIST_SIDE;
    let images = RealTensor4::from_fn(Shape4::new(n, 1, MNIST_PADDED_SIDE, MNIST_PADDED_SIDE), |s, _, y, x| {
        let (iy, ix) = (y.wrapping_sub(pad), x.wrapping_sub(pad));
        if iy < MNIST_SIDE && ix < MNIST_SIDE {
            pixels[s * plane + iy * MNIST_SIDE + ix] as f64 / 255.0
        } else {
            0.0
        }
    });
    Ok(Dataset::new("mnist", split, images, labels[..n].to_vec(), 10)?)
}

/// Splits CIFAR-10 binary records into labels and raw pixel bytes,
/// validating every label byte.
pub fn parse_cifar_records<'a>(bytes: &'a [u8], path: &Path) -> Result<Vec<(usize, &'a [u8])>, CliError> {
    if bytes.is_empty() {
        return Err(format_err(path, 0, "empty file"));
    }
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        let whole = bytes.len() / CIFAR_RECORD_LEN * CIFAR_RECORD_LEN;
        return Err(format_err(
            path,
            whole as u64,
            format!(
                "truncated record: {} trailing bytes, records are {CIFAR_RECORD_LEN} bytes",
                bytes.len() - whole
            ),
        ));
    }
    bytes
        .chunks_exact(CIFAR_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let label = rec[0] as usize;
            if label >= CIFAR_CLASSES {
                Err(format_err(
                    path,
                    (i * CIFAR_RECORD_LEN) as u64,
                    format!("record {i} has label byte {label}"),
                ))
            } else {
                Ok((label, &rec[1..]))
            }
        })
        .collect()
}

/// Loads up to `limit` CIFAR-10 samples from the binary batches in `dir`
/// (or `dir/cifar-10-batches-bin`). Training batches are read in order
/// until the limit is met.
pub fn load_cifar10(dir: &Path, split: Split, limit: Option<usize>) -> Result<Dataset, CliError> {
    let files: &[&str] = match split {
        Split::Train => &CIFAR_TRAIN_FILES,
        Split::Test => &[CIFAR_TEST_FILE],
    };
    let dir = locate(dir, CIFAR_SUBDIR, files[0]);
    let hint = "place the CIFAR-10 binary version (cifar-10-batches-bin) under DATA_DIR";
    let want = limit.unwrap_or(usize::MAX);
    let mut labels = Vec::new();
    let mut pixels: Vec<f64> = Vec::new();
    for name in files {
        if labels.len() >= want {
            break;
        }
        let path = dir.join(name);
        let bytes = read_file(&path, hint)?;
        for (label, raw) in parse_cifar_records(&bytes, &path)? {
            if labels.len() >= want {
                break;
            }
            labels.push(label);
            pixels.extend(raw.iter().map(|&b| b as f64 / 255.0));
        }
    }
    let shape = Shape4::new(labels.len(), CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE);
    Ok(Dataset::new(
        "cifar10",
        split,
        RealTensor4::from_vec(shape, pixels)?,
        labels,
        CIFAR_CLASSES,
    )?)
}

/// Resizes square images to `side`: box-filter averaging when shrinking,
/// zero insertion (samples on the coarse grid, zeros between) when
/// growing.
pub fn resample(d: &Dataset, side: usize) -> Result<Dataset, CliError> {
    let shape = d.images().shape();
    if !side.is_power_of_two() {
        return Err(CliError::Config(format!("resample side {side} is not a power of two")));
    }
    if shape.h != shape.w || !shape.h.is_power_of_two() {
        return Err(CliError::Config(format!(
            "resampling needs square power-of-two images, got {}×{}",
            shape.h, shape.w
        )));
    }
    let from = shape.h;
    if side == from {
        return Ok(d.clone());
    }
    let src = d.images();
    let images = if side < from {
        let f = from / side;
        let inv = 1.0 / (f * f) as f64;
        RealTensor4::from_fn(shape.with_hw(side, side), |s, c, y, x| {
            let plane = src.plane(s, c);
            let mut acc = 0.0;
            for dy in 0..f {
                let row = &plane[(y * f + dy) * from + x * f..][..f];
                acc += row.iter().sum::<f64>();
            }
            acc * inv
        })
    } else {
        let f = side / from;
        RealTensor4::from_fn(shape.with_hw(side, side), |s, c, y, x| {
            if y % f == 0 && x % f == 0 {
                src.get(s, c, y / f, x / f)
            } else {
                0.0
            }
        })
    };
    Ok(d.with_images(images)?)
}
