use super::GradBundle;
use crate::error::{Error, Result};
use crate::tensor::{RealTensor4, Shape4};

fn check(weight: Shape4, bias: Shape4, x: Shape4) -> Result<()> {
    let (out, inp) = (weight.s, weight.c);
    if weight.h != 1 || weight.w != 1 || bias != Shape4::new(1, out, 1, 1) {
        return Err(Error::shape(
            "dense",
            format!("weight ({out}, {inp}, 1, 1), bias (1, {out}, 1, 1)"),
            bias,
        ));
    }
    if x.c != inp || x.h != 1 || x.w != 1 {
        return Err(Error::shape("dense", format!("(S, {inp}, 1, 1)"), x));
    }
    Ok(())
}

/// `z = W·x + b` per sample. `weight` is `(out, in, 1, 1)`, `bias` is
/// `(1, out, 1, 1)` and `x` is `(S, in, 1, 1)`.
pub fn dense_forward(weight: &RealTensor4, bias: &RealTensor4, x: &RealTensor4) -> Result<RealTensor4> {
    check(weight.shape(), bias.shape(), x.shape())?;
    let (out, inp) = (weight.shape().s, weight.shape().c);
    let s_count = x.shape().s;
    let mut z = RealTensor4::zeros(Shape4::new(s_count, out, 1, 1));
    let (wd, bd, xd) = (weight.data(), bias.data(), x.data());
    let zd = z.data_mut();
    for s in 0..s_count {
        let xs = &xd[s * inp..(s + 1) * inp];
        for o in 0..out {
            let row = &wd[o * inp..(o + 1) * inp];
            zd[s * out + o] = bd[o] + row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(z)
}

/// Gradients `"weight"` and `"bias"` plus the input gradient `Wᵀ·g`.
pub fn dense_backward(
    weight: &RealTensor4,
    bias: &RealTensor4,
    x: &RealTensor4,
    g: &RealTensor4,
) -> Result<GradBundle<RealTensor4>> {
    check(weight.shape(), bias.shape(), x.shape())?;
    let (out, inp) = (weight.shape().s, weight.shape().c);
    let s_count = x.shape().s;
    if g.shape() != Shape4::new(s_count, out, 1, 1) {
        return Err(Error::shape(
            "dense_backward",
            Shape4::new(s_count, out, 1, 1),
            g.shape(),
        ));
    }
    let mut gw = RealTensor4::zeros(weight.shape());
    let mut gb = RealTensor4::zeros(bias.shape());
    let mut gx = RealTensor4::zeros(x.shape());
    let (wd, xd, gd) = (weight.data(), x.data(), g.data());
    for s in 0..s_count {
        let xs = &xd[s * inp..(s + 1) * inp];
        for o in 0..out {
            let gv = gd[s * out + o];
            if gv == 0.0 {
                continue;
            }
            gb.data_mut()[o] += gv;
            for (d, xv) in gw.data_mut()[o * inp..(o + 1) * inp].iter_mut().zip(xs) {
                *d += gv * xv;
            }
            for (d, wv) in gx.data_mut()[s * inp..(s + 1) * inp]
                .iter_mut()
                .zip(&wd[o * inp..(o + 1) * inp])
            {
                *d += gv * wv;
            }
        }
    }
    Ok(GradBundle {
        input_grad: gx,
        param_grads: vec![("weight", gw), ("bias", gb)],
    })
}
