//! Forward and backward passes for each layer kind.
//!
//! Complex gradients follow the convention `σ = ∂L/∂Re(z) + i·∂L/∂Im(z)`.
//! Under the real inner product `Re Σ conj(a)·b` every backward pass here
//! is the exact adjoint of its forward linearization, which is what the
//! finite-difference tests check.

mod dense;
mod pointwise;
mod pooling;
mod spatial_conv;
mod spectral_conv;

pub use dense::{dense_backward, dense_forward};
pub use pointwise::{pointwise, pointwise_grad, Pointwise};
pub use pooling::{
    max_pool_backward, max_pool_forward, spectral_pool_backward, spectral_pool_forward, MaxPoolIndices,
    SpectralPoolLayer,
};
pub use spatial_conv::{spatial_conv_backward, spatial_conv_forward, ConvMode};
pub use spectral_conv::SpectralConvLayer;

use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

/// A feature map in either the pixel or the frequency domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Activation {
    Spatial(RealTensor4),
    Spectral(ComplexTensor4),
}

impl Activation {
    pub fn shape(&self) -> Shape4 {
        match self {
            Activation::Spatial(t) => t.shape(),
            Activation::Spectral(t) => t.shape(),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Activation::Spatial(t) => t.all_finite(),
            Activation::Spectral(t) => t.all_finite(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Activation::Spatial(_) => Domain::Spatial,
            Activation::Spectral(_) => Domain::Spectral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Spatial,
    Spectral,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Spatial => "spatial",
            Domain::Spectral => "spectral",
        })
    }
}

/// Gradient of the loss with respect to a layer's input and parameters.
#[derive(Clone, Debug)]
pub struct GradBundle<G> {
    pub input_grad: G,
    pub param_grads: Vec<(&'static str, RealTensor4)>,
}

impl<G> GradBundle<G> {
    pub fn param(&self, name: &str) -> Option<&RealTensor4> {
        self.param_grads.iter().find(|(n, _)| *n == name).map(|(_, t)| t)
    }
}
