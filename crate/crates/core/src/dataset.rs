use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{RealTensor4, Shape4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Labelled images with pixel values in `[0, 1]`, stored as one
/// `(N, C, H, W)` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    name: String,
    split: Split,
    images: RealTensor4,
    labels: Vec<usize>,
    class_count: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        images: RealTensor4,
        labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let name = name.into();
        if images.shape().s != labels.len() {
            return Err(Error::InvalidShape(format!(
                "{name}: {} images but {} labels",
                images.shape().s,
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::InvalidShape(format!(
                "{name}: label {l} of sample {i} is not below the class count {class_count}"
            )));
        }
        if let Some(i) = images.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidShape(format!(
                "{name}: pixel value {} at flat index {i} is outside [0, 1]",
                images.data()[i]
            )));
        }
        Ok(Dataset {
            name,
            split,
            images,
            labels,
            class_count,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn images(&self) -> &RealTensor4 {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Shape of a single image, batch dimension 1.
    pub fn image_shape(&self) -> Shape4 {
        self.images.shape().with_batch(1)
    }

    /// The first `n` samples (all of them when `n` exceeds the length).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            name: self.name.clone(),
            split: self.split,
            images: self.images.batch_slice(0..n),
            labels: self.labels[..n].to_vec(),
            class_count: self.class_count,
        }
    }

    pub fn gather(&self, indices: &[usize]) -> (RealTensor4, Vec<usize>) {
        (
            self.images.gather_batch(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// Replaces the images, keeping labels; used by resampling.
    pub fn with_images(&self, images: RealTensor4) -> Result<Dataset> {
        Dataset::new(
            self.name.clone(),
            self.split,
            images,
            self.labels.clone(),
            self.class_count,
        )
    }
}
