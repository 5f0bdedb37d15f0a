use crate::error::{Error, Result};
use crate::tensor::RealTensor4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pointwise {
    Relu,
    Square,
    Identity,
}

impl Pointwise {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Pointwise::Relu => v.max(0.0),
            Pointwise::Square => v * v,
            Pointwise::Identity => v,
        }
    }

    /// Derivative at `v`; the relu kink at zero takes the value 0.
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Pointwise::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Pointwise::Square => 2.0 * v,
            Pointwise::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pointwise::Relu => "relu",
            Pointwise::Square => "square",
            Pointwise::Identity => "identity",
        }
    }
}

pub fn pointwise(kind: Pointwise, x: &RealTensor4) -> RealTensor4 {
    x.map(|v| kind.apply(v))
}

pub fn pointwise_grad(kind: Pointwise, x: &RealTensor4, g: &RealTensor4) -> Result<RealTensor4> {
    if x.shape() != g.shape() {
        return Err(Error::shape("pointwise_grad", x.shape(), g.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&v, &gv)| gv * kind.derivative(v))
        .collect();
    RealTensor4::from_vec(x.shape(), data)
}
