use num_complex::Complex64;

use super::Activation;
use crate::error::{Error, Result};
use crate::fft::{center_crop_freq, center_pad_freq, fft2, fft2_plane, ifft2};
use crate::tensor::{real_part, RealTensor4, Shape4};

/// Low-pass pooling that keeps the centered `out_hw` block of the spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpectralPoolLayer {
    pub out_hw: (usize, usize),
}

impl SpectralPoolLayer {
    pub fn new(out_h: usize, out_w: usize) -> Self {
        SpectralPoolLayer { out_hw: (out_h, out_w) }
    }
}

/// Spectral input: crop only. Spatial input: `Re(F⁻¹(crop(F(x))))`.
///
/// With the unnormalized forward transform the spatial route scales a
/// constant image by `H·W / (H'·W')`.
pub fn spectral_pool_forward(layer: &SpectralPoolLayer, t: &Activation) -> Result<Activation> {
    let (h2, w2) = layer.out_hw;
    match t {
        Activation::Spectral(x) => Ok(Activation::Spectral(center_crop_freq(x, h2, w2)?)),
        Activation::Spatial(x) => {
            let cropped = center_crop_freq(&fft2(x)?, h2, w2)?;
            Ok(Activation::Spatial(real_part(&ifft2(&cropped)?)))
        }
    }
}

/// Adjoint of [`spectral_pool_forward`]; `in_hw` is the forward input size.
///
/// Spectral gradients are zero-padded back to `in_hw`. Spatial gradients go
/// through `F`, the pad and the adjoint of the forward FFT, which works out
/// to `(H·W)/(H'·W') · Re(F⁻¹(pad(F(g))))`.
pub fn spectral_pool_backward(layer: &SpectralPoolLayer, g: &Activation, in_hw: (usize, usize)) -> Result<Activation> {
    let (h, w) = in_hw;
    let (h2, w2) = layer.out_hw;
    let gs = g.shape();
    if gs.h != h2 || gs.w != w2 {
        return Err(Error::shape("spectral_pool_backward", format!("{h2}x{w2} planes"), gs));
    }
    match g {
        Activation::Spectral(g) => Ok(Activation::Spectral(center_pad_freq(g, h, w)?)),
        Activation::Spatial(g) => {
            let mut padded = center_pad_freq(&fft2(g)?, h, w)?;
            let scale = 1.0 / (h2 * w2) as f64;
            let shape = padded.shape();
            for s in 0..shape.s {
                for c in 0..shape.c {
                    fft2_plane(padded.plane_mut(s, c), h, w, true)?;
                }
            }
            Ok(Activation::Spatial(padded.map(|v: Complex64| v.re * scale)))
        }
    }
}

/// Flat argmax positions recorded by [`max_pool_forward`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaxPoolIndices {
    pub input_shape: Shape4,
    pub output_shape: Shape4,
    pub argmax: Vec<usize>,
}

/// `k×k` max pooling at `stride`; ties go to the first row-major element.
pub fn max_pool_forward(x: &RealTensor4, k: usize, stride: usize) -> Result<(RealTensor4, MaxPoolIndices)> {
    let xs = x.shape();
    if k == 0 || stride == 0 || k > xs.h || k > xs.w {
        return Err(Error::InvalidShape(format!(
            "max pool window {k} (stride {stride}) on {xs}"
        )));
    }
    let (oh, ow) = ((xs.h - k) / stride + 1, (xs.w - k) / stride + 1);
    let out_shape = xs.with_hw(oh, ow);
    let mut y = RealTensor4::zeros(out_shape);
    let mut argmax = Vec::with_capacity(out_shape.len());
    for s in 0..xs.s {
        for c in 0..xs.c {
            let plane = x.plane(s, c);
            let base = xs.index(s, c, 0, 0);
            let out = y.plane_mut(s, c);
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = (f64::NEG_INFINITY, usize::MAX);
                    for a in 0..k {
                        for b in 0..k {
                            let idx = (i * stride + a) * xs.w + j * stride + b;
                            if plane[idx] > best.0 || best.1 == usize::MAX {
                                best = (plane[idx], idx);
                            }
                        }
                    }
                    out[i * ow + j] = best.0;
                    argmax.push(base + best.1);
                }
            }
        }
    }
    Ok((
        y,
        MaxPoolIndices {
            input_shape: xs,
            output_shape: out_shape,
            argmax,
        },
    ))
}

pub fn max_pool_backward(indices: &MaxPoolIndices, g: &RealTensor4) -> Result<RealTensor4> {
    if g.shape() != indices.output_shape {
        return Err(Error::shape("max_pool_backward", indices.output_shape, g.shape()));
    }
    let mut gx = RealTensor4::zeros(indices.input_shape);
    let dst = gx.data_mut();
    for (&i, &v) in indices.argmax.iter().zip(g.data()) {
        dst[i] += v;
    }
    Ok(gx)
}
