//! Radix-2 Cooley-Tukey 2D FFT over tensor planes, plus centered spectral
//! crop and zero-pad.
//!
//! Forward transforms are unnormalized; inverse transforms carry the full
//! `1/(H·W)` factor, so `F(x * k) = F(x) ⊙ F(k)` holds without rescaling.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor4, RealTensor4, Shape4, Tensor4};

/// Precomputed bit-reversal table and twiddles for one transform length.
#[derive(Debug)]
pub struct Radix2Plan {
    len: usize,
    bitrev: Vec<u32>,
    twiddles: Vec<Complex64>,
    inverse_twiddles: Vec<Complex64>,
}

impl Radix2Plan {
    pub fn new(len: usize) -> Self {
        assert!(
            len.is_power_of_two(),
            "radix-2 plan needs a power-of-two length, got {len}"
        );
        let bits = len.trailing_zeros();
        let bitrev = (0..len as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles: Vec<Complex64> = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let inverse_twiddles = twiddles.iter().map(|t| t.conj()).collect();
        Radix2Plan {
            len,
            bitrev,
            twiddles,
            inverse_twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized transform in place; `inverse` flips the exponent sign.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.len;
        debug_assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let twiddles = if inverse {
            &self.inverse_twiddles
        } else {
            &self.twiddles
        };
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for block in buf.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((a, b), tw) in lo.iter_mut().zip(hi.iter_mut()).zip(twiddles.iter().step_by(stride)) {
                    let t = *b * tw;
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
    }

    /// Transforms `width` interleaved sequences at once: `buf` holds `len`
    /// rows of `width` values and each column is one sequence.
    pub fn process_rows(&self, buf: &mut [Complex64], width: usize, inverse: bool) {
        let n = self.len;
        debug_assert_eq!(buf.len(), n * width);
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if i < j {
                let (head, tail) = buf.split_at_mut(j * width);
                head[i * width..(i + 1) * width].swap_with_slice(&mut tail[..width]);
            }
        }
        let twiddles = if inverse {
            &self.inverse_twiddles
        } else {
            &self.twiddles
        };
        let mut half = 1;
        while half < n {
            let stride = n / (2 * half);
            for block in buf.chunks_exact_mut(2 * half * width) {
                let (lo, hi) = block.split_at_mut(half * width);
                let rows = lo.chunks_exact_mut(width).zip(hi.chunks_exact_mut(width));
                for ((ra, rb), tw) in rows.zip(twiddles.iter().step_by(stride)) {
                    for (a, b) in ra.iter_mut().zip(rb.iter_mut()) {
                        let t = *b * tw;
                        *b = *a - t;
                        *a += t;
                    }
                }
            }
            half *= 2;
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Radix2Plan>>> = RefCell::new(HashMap::new());
}

fn plan(len: usize) -> Rc<Radix2Plan> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry(len)
            .or_insert_with(|| Rc::new(Radix2Plan::new(len)))
            .clone()
    })
}

/// Transforms one `h×w` row-major plane in place. Unnormalized in both
/// directions; callers apply the inverse scale.
pub fn fft2_plane(plane: &mut [Complex64], h: usize, w: usize, inverse: bool) -> Result<()> {
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return Err(Error::UnsupportedShape {
            op: "fft2",
            shape: Shape4::new(1, 1, h, w),
        });
    }
    let row_plan = plan(w);
    let zero = Complex64::default();
    for row in plane.chunks_exact_mut(w) {
        // zero rows (padded kernels) transform to zero
        if row.iter().any(|v| *v != zero) {
            row_plan.process(row, inverse);
        }
    }
    if h > 1 {
        // columns are transformed a strip at a time, kept row-major so every
        // copy and butterfly runs over contiguous memory
        const STRIP: usize = 32;
        let col_plan = plan(h);
        let mut strip = vec![Complex64::default(); h * STRIP.min(w)];
        for x0 in (0..w).step_by(STRIP) {
            let n = STRIP.min(w - x0);
            let buf = &mut strip[..h * n];
            for (dst, y) in buf.chunks_exact_mut(n).zip(0..h) {
                dst.copy_from_slice(&plane[y * w + x0..y * w + x0 + n]);
            }
            col_plan.process_rows(buf, n, inverse);
            for (src, y) in buf.chunks_exact(n).zip(0..h) {
                plane[y * w + x0..y * w + x0 + n].copy_from_slice(src);
            }
        }
    }
    Ok(())
}

/// Direct `O((HW)²)` DFT of one plane, used for non-power-of-two sizes.
pub fn dft2_plane(plane: &[Complex64], h: usize, w: usize, inverse: bool) -> Vec<Complex64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![Complex64::default(); h * w];
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::default();
            for y in 0..h {
                for x in 0..w {
                    // reduce the phase index first to keep the argument small
                    let phase = ((u * y) % h) as f64 / h as f64 + ((v * x) % w) as f64 / w as f64;
                    acc += plane[y * w + x] * Complex64::from_polar(1.0, sign * 2.0 * PI * phase);
                }
            }
            out[u * w + v] = acc;
        }
    }
    out
}

/// Inputs accepted by [`fft2`]: real images or complex spectra.
pub trait SpectralInput {
    fn to_complex_tensor(&self) -> ComplexTensor4;
}

impl SpectralInput for RealTensor4 {
    fn to_complex_tensor(&self) -> ComplexTensor4 {
        self.to_complex()
    }
}

impl SpectralInput for ComplexTensor4 {
    fn to_complex_tensor(&self) -> ComplexTensor4 {
        self.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FftPath {
    /// Radix-2 only; other sizes are an error.
    #[default]
    Radix2,
    /// Radix-2 where possible, direct DFT otherwise.
    AllowDft,
}

fn transform(mut t: ComplexTensor4, inverse: bool, path: FftPath) -> Result<ComplexTensor4> {
    let shape = t.shape();
    let (h, w) = (shape.h, shape.w);
    let radix2 = shape.is_radix2();
    if !radix2 && path == FftPath::Radix2 {
        return Err(Error::UnsupportedShape {
            op: if inverse { "ifft2" } else { "fft2" },
            shape,
        });
    }
    let norm = if inverse { 1.0 / (h * w) as f64 } else { 1.0 };
    for s in 0..shape.s {
        for c in 0..shape.c {
            let plane = t.plane_mut(s, c);
            if radix2 {
                fft2_plane(plane, h, w, inverse)?;
            } else {
                let out = dft2_plane(plane, h, w, inverse);
                plane.copy_from_slice(&out);
            }
            if inverse {
                plane.iter_mut().for_each(|v| *v *= norm);
            }
        }
    }
    Ok(t)
}

/// Unnormalized forward 2D DFT of every `(s, c)` plane.
pub fn fft2<T: SpectralInput>(t: &T) -> Result<ComplexTensor4> {
    transform(t.to_complex_tensor(), false, FftPath::Radix2)
}

/// Inverse 2D DFT with `1/(H·W)` normalization.
pub fn ifft2(t: &ComplexTensor4) -> Result<ComplexTensor4> {
    transform(t.clone(), true, FftPath::Radix2)
}

pub fn fft2_with<T: SpectralInput>(t: &T, path: FftPath) -> Result<ComplexTensor4> {
    transform(t.to_complex_tensor(), false, path)
}

pub fn ifft2_with(t: &ComplexTensor4, path: FftPath) -> Result<ComplexTensor4> {
    transform(t.clone(), true, path)
}

/// Signed frequencies kept by a centered band of `len` bins: for even
/// `len` this is `[-len/2, len/2)`, for odd `[-(len-1)/2, (len-1)/2]`.
fn band(len: usize) -> impl Iterator<Item = isize> {
    let lo = -((len / 2) as isize);
    lo..lo + len as isize
}

#[inline]
fn wrap(f: isize, n: usize) -> usize {
    f.rem_euclid(n as isize) as usize
}

/// Keeps the `h2×w2` lowest-frequency bins around DC.
///
/// Works on unshifted spectra: equivalent to `fftshift`, selecting rows
/// `[H/2 - h2/2, H/2 - h2/2 + h2)` (likewise columns), then `ifftshift`.
pub fn center_crop_freq(t: &ComplexTensor4, h2: usize, w2: usize) -> Result<ComplexTensor4> {
    let shape = t.shape();
    if h2 == 0 || w2 == 0 || h2 > shape.h || w2 > shape.w {
        return Err(Error::InvalidCrop { shape, h: h2, w: w2 });
    }
    let out_shape = shape.with_hw(h2, w2);
    let mut out = ComplexTensor4::zeros(out_shape);
    for s in 0..shape.s {
        for c in 0..shape.c {
            let src = t.plane(s, c);
            let dst = out.plane_mut(s, c);
            for fy in band(h2) {
                let (yi, yo) = (wrap(fy, shape.h), wrap(fy, h2));
                for fx in band(w2) {
                    dst[yo * w2 + wrap(fx, w2)] = src[yi * shape.w + wrap(fx, shape.w)];
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`center_crop_freq`]: embeds the spectrum in the centered
/// block of a zero `h2×w2` spectrum.
pub fn center_pad_freq(t: &ComplexTensor4, h2: usize, w2: usize) -> Result<ComplexTensor4> {
    let shape = t.shape();
    if h2 < shape.h || w2 < shape.w {
        return Err(Error::InvalidPad { shape, h: h2, w: w2 });
    }
    let out_shape = shape.with_hw(h2, w2);
    let mut out = ComplexTensor4::zeros(out_shape);
    for s in 0..shape.s {
        for c in 0..shape.c {
            let src = t.plane(s, c);
            let dst = out.plane_mut(s, c);
            for fy in band(shape.h) {
                let (yi, yo) = (wrap(fy, shape.h), wrap(fy, h2));
                for fx in band(shape.w) {
                    dst[yo * w2 + wrap(fx, w2)] = src[yi * shape.w + wrap(fx, shape.w)];
                }
            }
        }
    }
    Ok(out)
}

/// Moves DC to the centre of each plane (`numpy.fft.fftshift` convention).
pub fn fftshift<T: crate::tensor::Scalar>(t: &Tensor4<T>) -> Tensor4<T> {
    let shape = t.shape();
    let (h, w) = (shape.h, shape.w);
    Tensor4::from_fn(shape, |s, c, y, x| {
        t.get(s, c, (y + h - h / 2) % h, (x + w - w / 2) % w)
    })
}

/// Inverse of [`fftshift`].
pub fn ifftshift<T: crate::tensor::Scalar>(t: &Tensor4<T>) -> Tensor4<T> {
    let shape = t.shape();
    let (h, w) = (shape.h, shape.w);
    Tensor4::from_fn(shape, |s, c, y, x| t.get(s, c, (y + h / 2) % h, (x + w / 2) % w))
}
