//! Spectral CNN linear counterparts: FFT-domain convolution and pooling,
//! hand-written backpropagation, and knowledge-distillation training.

pub mod dataset;
pub mod distill;
pub mod error;
pub mod fft;
pub mod layers;
pub mod network;
pub mod tensor;

#[cfg(any(test, feature = "oracle"))]
pub mod oracle;

pub use error::{Error, Result};
pub use tensor::{ComplexTensor4, RealTensor4, Shape4};
