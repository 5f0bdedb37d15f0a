//! Brute-force reference computations for tests.
//!
//! Nothing here calls into the FFT or layer code: transforms are direct
//! double sums with freshly evaluated trig, convolutions are explicit index
//! loops, and gradients come from central differences.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

/// Direct 2D DFT of every plane. `inverse` uses `+i` and the `1/(H·W)` factor.
pub fn naive_dft2(t: &ComplexTensor4, inverse: bool) -> ComplexTensor4 {
    let shape = t.shape();
    let (h, w) = (shape.h, shape.w);
    let sign = if inverse { 1.0 } else { -1.0 };
    let norm = if inverse { 1.0 / (h * w) as f64 } else { 1.0 };
    ComplexTensor4::from_fn(shape, |s, c, u, v| {
        let mut acc = Complex64::new(0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let theta = sign * 2.0 * PI * ((u * y) as f64 / h as f64 + (v * x) as f64 / w as f64);
                acc += t.get(s, c, y, x) * Complex64::new(theta.cos(), theta.sin());
            }
        }
        acc * norm
    })
}

/// `y[s,o,i,j] = Σ_c Σ_{a,b} k[o,c,a,b] · x[s,c,(i-a) mod H,(j-b) mod W]`.
pub fn circular_conv(k: &RealTensor4, x: &RealTensor4) -> RealTensor4 {
    let (ks, xs) = (k.shape(), x.shape());
    assert_eq!(ks.c, xs.c);
    let (h, w) = (xs.h as isize, xs.w as isize);
    RealTensor4::from_fn(Shape4::new(xs.s, ks.s, xs.h, xs.w), |s, o, i, j| {
        let mut acc = 0.0;
        for c in 0..xs.c {
            for a in 0..ks.h {
                for b in 0..ks.w {
                    let y = (i as isize - a as isize).rem_euclid(h) as usize;
                    let xx = (j as isize - b as isize).rem_euclid(w) as usize;
                    acc += k.get(o, c, a, b) * x.get(s, c, y, xx);
                }
            }
        }
        acc
    })
}

/// Same indexing as [`circular_conv`] with out-of-range taps reading zero.
pub fn zero_pad_conv(k: &RealTensor4, x: &RealTensor4) -> RealTensor4 {
    let (ks, xs) = (k.shape(), x.shape());
    assert_eq!(ks.c, xs.c);
    RealTensor4::from_fn(Shape4::new(xs.s, ks.s, xs.h, xs.w), |s, o, i, j| {
        let mut acc = 0.0;
        for c in 0..xs.c {
            for a in 0..ks.h.min(i + 1) {
                for b in 0..ks.w.min(j + 1) {
                    acc += k.get(o, c, a, b) * x.get(s, c, i - a, j - b);
                }
            }
        }
        acc
    })
}

/// Central-difference derivative of `f` with respect to each coordinate of
/// `x`, with step `eps`.
pub fn central_diff(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a-b| / max(|a|, |b|, floor)` over paired entries.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Flattens a complex tensor into interleaved `[re, im, re, im, ...]`.
pub fn complex_to_reals(t: &ComplexTensor4) -> Vec<f64> {
    t.data().iter().flat_map(|v| [v.re, v.im]).collect()
}

pub fn reals_to_complex(shape: Shape4, v: &[f64]) -> ComplexTensor4 {
    let data = v.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
    ComplexTensor4::from_vec(shape, data).expect("length matches shape")
}
