use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{ConvMode, Domain, Pointwise};
use crate::tensor::Shape4;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    SpatialConv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        mode: ConvMode,
    },
    SpectralConv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    SpectralPool {
        out_h: usize,
        out_w: usize,
    },
    Pointwise(Pointwise),
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Flatten,
    ToSpectral,
    ToSpatial,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::SpatialConv { .. } => "spatial_conv",
            LayerSpec::SpectralConv { .. } => "spectral_conv",
            LayerSpec::MaxPool { .. } => "max_pool",
            LayerSpec::SpectralPool { .. } => "spectral_pool",
            LayerSpec::Pointwise(p) => p.name(),
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Flatten => "flatten",
            LayerSpec::ToSpectral => "to_spectral",
            LayerSpec::ToSpatial => "to_spatial",
        }
    }

    /// Learnable tensors of this layer as `(name, shape)`.
    pub fn param_shapes(&self) -> Vec<(&'static str, Shape4)> {
        match *self {
            LayerSpec::SpatialConv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                ("kernel", Shape4::new(out_channels, in_channels, kernel, kernel)),
                ("bias", Shape4::new(1, out_channels, 1, 1)),
            ],
            LayerSpec::SpectralConv {
                in_channels,
                out_channels,
                kernel,
            } => vec![("kernel", Shape4::new(out_channels, in_channels, kernel, kernel))],
            LayerSpec::Dense { inputs, outputs } => vec![
                ("weight", Shape4::new(outputs, inputs, 1, 1)),
                ("bias", Shape4::new(1, outputs, 1, 1)),
            ],
            _ => vec![],
        }
    }

    pub fn is_learnable(&self) -> bool {
        !self.param_shapes().is_empty()
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::SpatialConv {
                in_channels,
                out_channels,
                kernel,
                mode,
            } => write!(
                f,
                "spatial_conv({in_channels}->{out_channels}, {kernel}x{kernel}, {mode:?})"
            ),
            LayerSpec::SpectralConv {
                in_channels,
                out_channels,
                kernel,
            } => write!(f, "spectral_conv({in_channels}->{out_channels}, {kernel}x{kernel})"),
            LayerSpec::MaxPool { size, stride } => write!(f, "max_pool({size}, stride {stride})"),
            LayerSpec::SpectralPool { out_h, out_w } => write!(f, "spectral_pool({out_h}x{out_w})"),
            LayerSpec::Dense { inputs, outputs } => write!(f, "dense({inputs}->{outputs})"),
            other => f.write_str(other.kind()),
        }
    }
}

/// Name used for a parameter of layer `index` in a [`ParamStore`](super::ParamStore).
pub fn param_name(index: usize, name: &str) -> String {
    format!("L{index:02}.{name}")
}

/// Domain and per-sample shape (batch dimension 1) of an activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActShape {
    pub domain: Domain,
    pub shape: Shape4,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Per-sample input shape; the batch field is ignored.
    pub input_shape: Shape4,
    pub class_count: usize,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, input_shape: Shape4, class_count: usize, layers: Vec<LayerSpec>) -> Self {
        NetworkSpec {
            name: name.into(),
            layers,
            input_shape: input_shape.with_batch(1),
            class_count,
        }
    }

    /// Predicted output shape of every layer, in order. Fails on the first
    /// incompatible layer and names it.
    pub fn infer_shapes(&self) -> Result<Vec<ActShape>> {
        let mut cur = ActShape {
            domain: Domain::Spatial,
            shape: self.input_shape.with_batch(1),
        };
        cur.shape.validate()?;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = next_shape(layer, cur).map_err(|msg| {
                Error::InvalidShape(format!("{}: layer {i} ({layer}) on {}: {msg}", self.name, cur.shape))
            })?;
            out.push(cur);
        }
        let expected = Shape4::new(1, self.class_count, 1, 1);
        if cur.domain != Domain::Spatial || cur.shape != expected {
            return Err(Error::InvalidShape(format!(
                "{}: final activation {} ({}) is not a {}-class logit vector",
                self.name, cur.shape, cur.domain, self.class_count
            )));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.infer_shapes().map(|_| ())
    }

    /// Index of the first dense layer (start of the backend), if any.
    pub fn backend_start(&self) -> Option<usize> {
        self.layers.iter().position(|l| matches!(l, LayerSpec::Dense { .. }))
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.param_shapes())
            .map(|(_, s)| s.len())
            .sum()
    }
}

fn next_shape(layer: &LayerSpec, cur: ActShape) -> std::result::Result<ActShape, String> {
    let s = cur.shape;
    let need = |domain: Domain| {
        if cur.domain == domain {
            Ok(())
        } else {
            Err(format!("expects {domain} input, got {}", cur.domain))
        }
    };
    let radix2 = || {
        if s.is_radix2() {
            Ok(())
        } else {
            Err("spatial dims must be powers of two".to_string())
        }
    };
    match *layer {
        LayerSpec::SpatialConv {
            in_channels,
            out_channels,
            kernel,
            ..
        } => {
            need(Domain::Spatial)?;
            conv_shape(s, in_channels, out_channels, kernel)?;
            Ok(ActShape {
                domain: Domain::Spatial,
                shape: s.with_channels(out_channels),
            })
        }
        LayerSpec::SpectralConv {
            in_channels,
            out_channels,
            kernel,
        } => {
            need(Domain::Spectral)?;
            conv_shape(s, in_channels, out_channels, kernel)?;
            Ok(ActShape {
                domain: Domain::Spectral,
                shape: s.with_channels(out_channels),
            })
        }
        LayerSpec::MaxPool { size, stride } => {
            need(Domain::Spatial)?;
            if size == 0 || stride == 0 || size > s.h || size > s.w {
                return Err(format!("window {size} stride {stride} does not fit"));
            }
            Ok(ActShape {
                domain: Domain::Spatial,
                shape: s.with_hw((s.h - size) / stride + 1, (s.w - size) / stride + 1),
            })
        }
        LayerSpec::SpectralPool { out_h, out_w } => {
            if out_h == 0 || out_w == 0 || out_h > s.h || out_w > s.w {
                return Err(format!("cannot crop to {out_h}x{out_w}"));
            }
            if cur.domain == Domain::Spatial {
                radix2()?;
                if !out_h.is_power_of_two() || !out_w.is_power_of_two() {
                    return Err("spatial-domain pool output must be a power of two".into());
                }
            }
            Ok(ActShape {
                domain: cur.domain,
                shape: s.with_hw(out_h, out_w),
            })
        }
        LayerSpec::Pointwise(_) => {
            need(Domain::Spatial)?;
            Ok(cur)
        }
        LayerSpec::Dense { inputs, outputs } => {
            need(Domain::Spatial)?;
            if s.h != 1 || s.w != 1 || s.c != inputs {
                return Err(format!("dense expects (1, {inputs}, 1, 1); flatten first"));
            }
            Ok(ActShape {
                domain: Domain::Spatial,
                shape: Shape4::new(1, outputs, 1, 1),
            })
        }
        LayerSpec::Flatten => {
            need(Domain::Spatial)?;
            Ok(ActShape {
                domain: Domain::Spatial,
                shape: Shape4::new(1, s.c * s.h * s.w, 1, 1),
            })
        }
        LayerSpec::ToSpectral => {
            need(Domain::Spatial)?;
            radix2()?;
            Ok(ActShape {
                domain: Domain::Spectral,
                shape: s,
            })
        }
        LayerSpec::ToSpatial => {
            need(Domain::Spectral)?;
            radix2()?;
            Ok(ActShape {
                domain: Domain::Spatial,
                shape: s,
            })
        }
    }
}

fn conv_shape(s: Shape4, in_channels: usize, out_channels: usize, kernel: usize) -> std::result::Result<(), String> {
    if s.c != in_channels {
        return Err(format!("expects {in_channels} channels, got {}", s.c));
    }
    if out_channels == 0 || kernel == 0 || kernel > s.h || kernel > s.w {
        return Err(format!("kernel {kernel} does not fit"));
    }
    Ok(())
}

/// Desk-scale AlexNet-style teacher: three `[conv, act, max_pool 2]` blocks
/// with 16, 32 and 64 channels (5×5 then 3×3 kernels), flatten, dense.
///
/// Kernels are clamped to the feature-map side so small inputs (side 8)
/// still build; `side` must be a multiple of 8.
pub fn mini_teacher(channels: usize, side: usize, class_count: usize, act: Pointwise) -> NetworkSpec {
    let mut layers = Vec::new();
    let widths = [(channels, 16, 5), (16, 32, 3), (32, 64, 3)];
    for (block, (in_channels, out_channels, kernel)) in widths.into_iter().enumerate() {
        let current = side >> block;
        layers.push(LayerSpec::SpatialConv {
            in_channels,
            out_channels,
            kernel: kernel.min(current.max(1)),
            mode: ConvMode::ZeroPad,
        });
        layers.push(LayerSpec::Pointwise(act));
        layers.push(LayerSpec::MaxPool { size: 2, stride: 2 });
    }
    let final_side = side / 8;
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense {
        inputs: 64 * final_side * final_side,
        outputs: class_count,
    });
    let name = match act {
        Pointwise::Relu => "mini-teacher",
        Pointwise::Square => "mini-teacher-sq",
        Pointwise::Identity => "mini-teacher-linear",
    };
    NetworkSpec::new(name, Shape4::new(1, channels, side, side), class_count, layers)
}

/// Dense classifier directly on flattened pixels.
pub fn backend_only(input_shape: Shape4, class_count: usize) -> NetworkSpec {
    let inputs = input_shape.c * input_shape.h * input_shape.w;
    NetworkSpec::new(
        "backend-only",
        input_shape,
        class_count,
        vec![
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs,
                outputs: class_count,
            },
        ],
    )
}

/// Maps a nonlinear teacher onto its spectral linear counterpart.
///
/// Spatial convolutions become spectral convolutions with the same kernel
/// and channel hyperparameters, relu layers are dropped, max pools become
/// spectral crops to `input / stride`, and the dense backend is kept. The
/// student enters the frequency domain right after the input and leaves it
/// before flatten.
pub fn linear_counterpart(teacher: &NetworkSpec) -> Result<NetworkSpec> {
    let mut layers = vec![LayerSpec::ToSpectral];
    let (mut h, mut w) = (teacher.input_shape.h, teacher.input_shape.w);
    let mut spectral = true;
    for (i, layer) in teacher.layers.iter().enumerate() {
        let leave_spectral = |layers: &mut Vec<LayerSpec>, spectral: &mut bool| {
            if *spectral {
                layers.push(LayerSpec::ToSpatial);
                *spectral = false;
            }
        };
        match *layer {
            LayerSpec::SpatialConv {
                in_channels,
                out_channels,
                kernel,
                ..
            } => {
                if !spectral {
                    return Err(Error::Transform(format!(
                        "layer {i}: convolution after the backend started"
                    )));
                }
                layers.push(LayerSpec::SpectralConv {
                    in_channels,
                    out_channels,
                    kernel,
                });
            }
            LayerSpec::Pointwise(Pointwise::Relu) | LayerSpec::Pointwise(Pointwise::Identity) => {}
            LayerSpec::MaxPool { stride, .. } => {
                if !spectral {
                    return Err(Error::Transform(format!(
                        "layer {i}: pooling after the backend started"
                    )));
                }
                if stride == 0 || h % stride != 0 || w % stride != 0 {
                    return Err(Error::Transform(format!(
                        "layer {i}: stride {stride} does not divide {h}x{w}"
                    )));
                }
                h /= stride;
                w /= stride;
                layers.push(LayerSpec::SpectralPool { out_h: h, out_w: w });
            }
            LayerSpec::Flatten => {
                leave_spectral(&mut layers, &mut spectral);
                layers.push(LayerSpec::Flatten);
            }
            LayerSpec::Dense { inputs, outputs } => {
                if spectral {
                    leave_spectral(&mut layers, &mut spectral);
                    layers.push(LayerSpec::Flatten);
                }
                layers.push(LayerSpec::Dense { inputs, outputs });
            }
            ref other => {
                return Err(Error::Transform(format!(
                    "layer {i}: unsupported teacher layer {other}"
                )));
            }
        }
    }
    if spectral {
        layers.push(LayerSpec::ToSpatial);
    }
    Ok(NetworkSpec::new(
        format!("{}-sclc", teacher.name),
        teacher.input_shape,
        teacher.class_count,
        layers,
    ))
}

/// Linear spectral student that keeps the teacher's max pools, stepping out
/// of the frequency domain around each one.
pub fn max_pool_counterpart(teacher: &NetworkSpec) -> Result<NetworkSpec> {
    let spectral = linear_counterpart(teacher)?;
    let mut layers = Vec::new();
    let pools = teacher.layers.iter().filter_map(|l| match l {
        LayerSpec::MaxPool { size, stride } => Some((*size, *stride)),
        _ => None,
    });
    let mut pools = pools.collect::<Vec<_>>().into_iter();
    for layer in spectral.layers {
        match layer {
            LayerSpec::SpectralPool { .. } => {
                let (size, stride) = pools.next().expect("one pool per spectral pool");
                layers.push(LayerSpec::ToSpatial);
                layers.push(LayerSpec::MaxPool { size, stride });
                layers.push(LayerSpec::ToSpectral);
            }
            other => layers.push(other),
        }
    }
    // collapse ToSpectral immediately followed by ToSpatial
    let mut collapsed: Vec<LayerSpec> = Vec::with_capacity(layers.len());
    for layer in layers {
        if layer == LayerSpec::ToSpatial && collapsed.last() == Some(&LayerSpec::ToSpectral) {
            collapsed.pop();
            continue;
        }
        collapsed.push(layer);
    }
    Ok(NetworkSpec::new(
        format!("{}-sclc-maxpool", teacher.name),
        teacher.input_shape,
        teacher.class_count,
        collapsed,
    ))
}
