use num_complex::Complex64;

use super::params::{ParamGrads, ParamStore};
use super::spec::{param_name, LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::fft::{fft2, fft2_plane, ifft2};
use crate::layers::{
    dense_backward, dense_forward, max_pool_backward, max_pool_forward, pointwise, pointwise_grad,
    spatial_conv_backward, spatial_conv_forward, spectral_pool_backward, spectral_pool_forward, Activation,
    MaxPoolIndices, SpectralConvLayer, SpectralPoolLayer,
};
use crate::tensor::{real_part, ComplexTensor4, RealTensor4, Shape4};

/// What one layer kept from the forward pass.
#[derive(Clone, Debug)]
enum Record {
    SpatialConv {
        input: RealTensor4,
    },
    SpectralConv {
        layer: SpectralConvLayer,
        input: ComplexTensor4,
    },
    MaxPool(MaxPoolIndices),
    SpectralPool {
        in_hw: (usize, usize),
    },
    Pointwise {
        input: RealTensor4,
    },
    Dense {
        input: RealTensor4,
    },
    Flatten {
        shape: Shape4,
    },
    ToSpectral,
    ToSpatial,
}

/// Activations retained by a recording forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    network: String,
    batch: usize,
    records: Vec<Record>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

fn expect_spatial(a: Activation, layer: usize) -> Result<RealTensor4> {
    match a {
        Activation::Spatial(t) => Ok(t),
        Activation::Spectral(_) => Err(Error::State(format!("layer {layer} expected a spatial activation"))),
    }
}

fn expect_spectral(a: Activation, layer: usize) -> Result<ComplexTensor4> {
    match a {
        Activation::Spectral(t) => Ok(t),
        Activation::Spatial(_) => Err(Error::State(format!("layer {layer} expected a spectral activation"))),
    }
}

fn add_channel_bias(y: &mut RealTensor4, bias: &RealTensor4) {
    let shape = y.shape();
    for s in 0..shape.s {
        for c in 0..shape.c {
            let b = bias.data()[c];
            y.plane_mut(s, c).iter_mut().for_each(|v| *v += b);
        }
    }
}

fn channel_sums(g: &RealTensor4) -> RealTensor4 {
    let shape = g.shape();
    let mut out = RealTensor4::zeros(Shape4::new(1, shape.c, 1, 1));
    for s in 0..shape.s {
        for c in 0..shape.c {
            out.data_mut()[c] += g.plane(s, c).iter().sum::<f64>();
        }
    }
    out
}

struct Pass<'a> {
    net: &'a NetworkSpec,
    params: &'a ParamStore,
}

impl Pass<'_> {
    fn run(&self, batch: &RealTensor4, stop_before: usize, record: bool) -> Result<(Activation, Vec<Record>)> {
        let want = self.net.input_shape;
        let bs = batch.shape();
        if bs.with_batch(1) != want {
            return Err(Error::shape(
                "forward",
                format!("(S, {}, {}, {})", want.c, want.h, want.w),
                bs,
            ));
        }
        let mut act = Activation::Spatial(batch.clone());
        let mut records = Vec::new();
        for (i, layer) in self.net.layers.iter().enumerate().take(stop_before) {
            let (next, rec) = self.step(i, layer, act, record)?;
            if !next.all_finite() {
                return Err(Error::NonFinite {
                    context: format!("{} layer {i} ({layer}) output", self.net.name),
                });
            }
            if let Some(rec) = rec {
                records.push(rec);
            }
            act = next;
        }
        Ok((act, records))
    }

    fn step(&self, i: usize, layer: &LayerSpec, act: Activation, record: bool) -> Result<(Activation, Option<Record>)> {
        let keep = |r: Record| if record { Some(r) } else { None };
        Ok(match *layer {
            LayerSpec::SpatialConv { mode, .. } => {
                let x = expect_spatial(act, i)?;
                let k = self.params.value(&param_name(i, "kernel"))?;
                let mut y = spatial_conv_forward(k, &x, mode)?;
                add_channel_bias(&mut y, self.params.value(&param_name(i, "bias"))?);
                (Activation::Spatial(y), keep(Record::SpatialConv { input: x }))
            }
            LayerSpec::SpectralConv { .. } => {
                let x = expect_spectral(act, i)?;
                let shape = x.shape();
                let k = self.params.value(&param_name(i, "kernel"))?;
                let layer = SpectralConvLayer::new(k.clone(), (shape.h, shape.w))?;
                let y = layer.forward(&x)?;
                (Activation::Spectral(y), keep(Record::SpectralConv { layer, input: x }))
            }
            LayerSpec::MaxPool { size, stride } => {
                let x = expect_spatial(act, i)?;
                let (y, idx) = max_pool_forward(&x, size, stride)?;
                (Activation::Spatial(y), keep(Record::MaxPool(idx)))
            }
            LayerSpec::SpectralPool { out_h, out_w } => {
                let s = act.shape();
                let y = spectral_pool_forward(&SpectralPoolLayer::new(out_h, out_w), &act)?;
                (y, keep(Record::SpectralPool { in_hw: (s.h, s.w) }))
            }
            LayerSpec::Pointwise(kind) => {
                let x = expect_spatial(act, i)?;
                let y = pointwise(kind, &x);
                (Activation::Spatial(y), keep(Record::Pointwise { input: x }))
            }
            LayerSpec::Dense { .. } => {
                let x = expect_spatial(act, i)?;
                let w = self.params.value(&param_name(i, "weight"))?;
                let b = self.params.value(&param_name(i, "bias"))?;
                let y = dense_forward(w, b, &x)?;
                (Activation::Spatial(y), keep(Record::Dense { input: x }))
            }
            LayerSpec::Flatten => {
                let x = expect_spatial(act, i)?;
                let shape = x.shape();
                let flat = x.reshape(Shape4::new(shape.s, shape.c * shape.h * shape.w, 1, 1))?;
                (Activation::Spatial(flat), keep(Record::Flatten { shape }))
            }
            LayerSpec::ToSpectral => {
                let x = expect_spatial(act, i)?;
                (Activation::Spectral(fft2(&x)?), keep(Record::ToSpectral))
            }
            LayerSpec::ToSpatial => {
                let x = expect_spectral(act, i)?;
                (Activation::Spatial(real_part(&ifft2(&x)?)), keep(Record::ToSpatial))
            }
        })
    }
}

/// Runs `batch` through the network and returns `(S, classes, 1, 1)`
/// logits, plus the tape when `record_tape` is set.
pub fn forward(
    net: &NetworkSpec,
    params: &ParamStore,
    batch: &RealTensor4,
    record_tape: bool,
) -> Result<(RealTensor4, Option<Tape>)> {
    let pass = Pass { net, params };
    let (out, records) = pass.run(batch, net.layers.len(), record_tape)?;
    let logits = expect_spatial(out, net.layers.len())?;
    let tape = record_tape.then(|| Tape {
        network: net.name.clone(),
        batch: batch.shape().s,
        records,
    });
    Ok((logits, tape))
}

/// Activation entering the first dense layer: the frontend's output.
pub fn features(net: &NetworkSpec, params: &ParamStore, batch: &RealTensor4) -> Result<Activation> {
    let stop = net.backend_start().unwrap_or(net.layers.len());
    let pass = Pass { net, params };
    Ok(pass.run(batch, stop, false)?.0)
}

/// Backpropagates `logit_grad` through the recorded pass and returns the
/// gradient of every learnable tensor.
pub fn backward(net: &NetworkSpec, params: &ParamStore, tape: &Tape, logit_grad: &RealTensor4) -> Result<ParamGrads> {
    if tape.network != net.name || tape.records.len() != net.layers.len() {
        return Err(Error::State(format!(
            "tape for {} with {} records does not match {}",
            tape.network,
            tape.records.len(),
            net.name
        )));
    }
    let expected = Shape4::new(tape.batch, net.class_count, 1, 1);
    if logit_grad.shape() != expected {
        return Err(Error::shape("backward", expected, logit_grad.shape()));
    }
    let mut grads = ParamGrads::new();
    let mut g = Activation::Spatial(logit_grad.clone());
    for (i, (layer, record)) in net.layers.iter().zip(&tape.records).enumerate().rev() {
        g = match (layer, record) {
            (LayerSpec::SpatialConv { mode, .. }, Record::SpatialConv { input }) => {
                let gy = expect_spatial(g, i)?;
                let k = params.value(&param_name(i, "kernel"))?;
                let mut bundle = spatial_conv_backward(k, input, &gy, *mode)?;
                grads.insert(param_name(i, "bias"), channel_sums(&gy));
                for (name, t) in bundle.param_grads.drain(..) {
                    grads.insert(param_name(i, name), t);
                }
                Activation::Spatial(bundle.input_grad)
            }
            (LayerSpec::SpectralConv { .. }, Record::SpectralConv { layer, input }) => {
                let gy = expect_spectral(g, i)?;
                let mut bundle = layer.backward(input, &gy)?;
                for (name, t) in bundle.param_grads.drain(..) {
                    grads.insert(param_name(i, name), t);
                }
                Activation::Spectral(bundle.input_grad)
            }
            (LayerSpec::MaxPool { .. }, Record::MaxPool(idx)) => {
                Activation::Spatial(max_pool_backward(idx, &expect_spatial(g, i)?)?)
            }
            (LayerSpec::SpectralPool { out_h, out_w }, Record::SpectralPool { in_hw }) => {
                spectral_pool_backward(&SpectralPoolLayer::new(*out_h, *out_w), &g, *in_hw)?
            }
            (LayerSpec::Pointwise(kind), Record::Pointwise { input }) => {
                Activation::Spatial(pointwise_grad(*kind, input, &expect_spatial(g, i)?)?)
            }
            (LayerSpec::Dense { .. }, Record::Dense { input }) => {
                let w = params.value(&param_name(i, "weight"))?;
                let b = params.value(&param_name(i, "bias"))?;
                let mut bundle = dense_backward(w, b, input, &expect_spatial(g, i)?)?;
                for (name, t) in bundle.param_grads.drain(..) {
                    grads.insert(param_name(i, name), t);
                }
                Activation::Spatial(bundle.input_grad)
            }
            (LayerSpec::Flatten, Record::Flatten { shape }) => {
                Activation::Spatial(expect_spatial(g, i)?.reshape(*shape)?)
            }
            (LayerSpec::ToSpectral, Record::ToSpectral) => {
                if i == 0 {
                    // the input image needs no gradient
                    break;
                }
                // adjoint of the unnormalized forward FFT, projected to reals
                let mut gx = expect_spectral(g, i)?;
                let shape = gx.shape();
                for s in 0..shape.s {
                    for c in 0..shape.c {
                        fft2_plane(gx.plane_mut(s, c), shape.h, shape.w, true)?;
                    }
                }
                Activation::Spatial(gx.map(|v: Complex64| v.re))
            }
            (LayerSpec::ToSpatial, Record::ToSpatial) => {
                // adjoint of Re∘F⁻¹: F(g) / (H·W)
                let gy = expect_spatial(g, i)?;
                let shape = gy.shape();
                Activation::Spectral(fft2(&gy)?.scale(1.0 / shape.plane_len() as f64))
            }
            _ => return Err(Error::State(format!("tape record {i} does not match layer {layer}"))),
        };
    }
    Ok(grads)
}
