use super::GradBundle;
use crate::error::{Error, Result};
use crate::tensor::{RealTensor4, Shape4};

/// Boundary handling for direct convolution.
///
/// Both modes compute `y[i,j] = Σ_{a,b} k[a,b] · x[i-a, j-b]` at stride 1
/// with same-size output. `Circular` wraps indices (the operation realized
/// by a spectral product); `ZeroPad` reads zero outside the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConvMode {
    Circular,
    ZeroPad,
}

fn check(k: Shape4, x: Shape4) -> Result<()> {
    if k.c != x.c {
        return Err(Error::shape("spatial_conv", format!("{} input channels", k.c), x));
    }
    if k.h > x.h || k.w > x.w {
        return Err(Error::InvalidShape(format!("kernel {k} larger than image {x}")));
    }
    Ok(())
}

/// Visits every `(dst_row, src_row, dst_cols, src_cols)` pairing of one
/// kernel tap `(a, b)`: `dst[i][j]` pairs with `src[i-a][j-b]`.
#[inline]
fn for_each_tap_row(
    h: usize,
    w: usize,
    a: usize,
    b: usize,
    mode: ConvMode,
    mut f: impl FnMut(usize, usize, std::ops::Range<usize>, std::ops::Range<usize>),
) {
    match mode {
        ConvMode::ZeroPad => {
            for i in a..h {
                f(i, i - a, b..w, 0..w - b);
            }
        }
        ConvMode::Circular => {
            for i in 0..h {
                let si = (i + h - a) % h;
                f(i, si, b..w, 0..w - b);
                if b > 0 {
                    f(i, si, 0..b, w - b..w);
                }
            }
        }
    }
}

/// Direct stride-1 convolution summed over input channels.
///
/// `k` is `(C_out, C_in, kh, kw)`, `x` is `(S, C_in, H, W)`; the output is
/// `(S, C_out, H, W)`.
pub fn spatial_conv_forward(k: &RealTensor4, x: &RealTensor4, mode: ConvMode) -> Result<RealTensor4> {
    let (ks, xs) = (k.shape(), x.shape());
    check(ks, xs)?;
    let (h, w) = (xs.h, xs.w);
    let mut y = RealTensor4::zeros(xs.with_channels(ks.s));
    for s in 0..xs.s {
        for o in 0..ks.s {
            let out = y.plane_mut(s, o);
            for c in 0..ks.c {
                let src = x.plane(s, c);
                let kern = k.plane(o, c);
                for a in 0..ks.h {
                    for b in 0..ks.w {
                        let kv = kern[a * ks.w + b];
                        if kv == 0.0 {
                            continue;
                        }
                        for_each_tap_row(h, w, a, b, mode, |di, si, dc, sc| {
                            let dst = &mut out[di * w + dc.start..di * w + dc.end];
                            let s_row = &src[si * w + sc.start..si * w + sc.end];
                            for (d, v) in dst.iter_mut().zip(s_row) {
                                *d += kv * v;
                            }
                        });
                    }
                }
            }
        }
    }
    Ok(y)
}

/// Gradients of [`spatial_conv_forward`] with respect to the input and the
/// kernel (`"kernel"`), given the upstream gradient `g`.
pub fn spatial_conv_backward(
    k: &RealTensor4,
    x: &RealTensor4,
    g: &RealTensor4,
    mode: ConvMode,
) -> Result<GradBundle<RealTensor4>> {
    let (ks, xs) = (k.shape(), x.shape());
    check(ks, xs)?;
    let expected = xs.with_channels(ks.s);
    if g.shape() != expected {
        return Err(Error::shape("spatial_conv_backward", expected, g.shape()));
    }
    let (h, w) = (xs.h, xs.w);
    let mut gx = RealTensor4::zeros(xs);
    let mut gk = RealTensor4::zeros(ks);
    for s in 0..xs.s {
        for o in 0..ks.s {
            let up = g.plane(s, o);
            for c in 0..ks.c {
                let src = x.plane(s, c);
                let kern = k.plane(o, c);
                let gk_plane = gk.plane_mut(o, c);
                let gx_plane = gx.plane_mut(s, c);
                for a in 0..ks.h {
                    for b in 0..ks.w {
                        let kv = kern[a * ks.w + b];
                        let mut dot = 0.0;
                        for_each_tap_row(h, w, a, b, mode, |di, si, dc, sc| {
                            let g_row = &up[di * w + dc.start..di * w + dc.end];
                            let s_row = &src[si * w + sc.start..si * w + sc.end];
                            dot += g_row.iter().zip(s_row).map(|(p, q)| p * q).sum::<f64>();
                            let gx_row = &mut gx_plane[si * w + sc.start..si * w + sc.end];
                            for (d, gv) in gx_row.iter_mut().zip(g_row) {
                                *d += kv * gv;
                            }
                        });
                        gk_plane[a * ks.w + b] += dot;
                    }
                }
            }
        }
    }
    Ok(GradBundle {
        input_grad: gx,
        param_grads: vec![("kernel", gk)],
    })
}
