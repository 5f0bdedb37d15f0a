//! Dense batched feature maps laid out as `(S, C, H, W)` in row-major order.
//!
//! Real tensors hold images, kernels and gradients in the pixel domain;
//! complex tensors hold their spectra. Both share one generic container so
//! indexing, plane iteration and serialization are written once.

use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape4 {
    pub s: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub const fn new(s: usize, c: usize, h: usize, w: usize) -> Self {
        Shape4 { s, c, h, w }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.c == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::InvalidShape(format!("zero-sized dimension in {self}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.s * self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    pub fn planes(&self) -> usize {
        self.s * self.c
    }

    /// Both spatial dimensions are powers of two.
    pub fn is_radix2(&self) -> bool {
        self.h.is_power_of_two() && self.w.is_power_of_two()
    }

    pub fn with_batch(self, s: usize) -> Self {
        Shape4 { s, ..self }
    }

    pub fn with_channels(self, c: usize) -> Self {
        Shape4 { c, ..self }
    }

    pub fn with_hw(self, h: usize, w: usize) -> Self {
        Shape4 { h, w, ..self }
    }

    #[inline]
    pub fn index(&self, s: usize, c: usize, y: usize, x: usize) -> usize {
        ((s * self.c + c) * self.h + y) * self.w + x
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.s, self.c, self.h, self.w)
    }
}

/// Scalar field of a tensor. Implemented for `f64` and `Complex64`.
pub trait Scalar: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const DTYPE: u32;
    const BYTES: usize;
    fn is_finite(&self) -> bool;
    fn write_le(&self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f64 {
    const DTYPE: u32 = 0;
    const BYTES: usize = 8;

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

impl Scalar for Complex64 {
    const DTYPE: u32 = 1;
    const BYTES: usize = 16;

    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.re.to_le_bytes());
        out.extend_from_slice(&self.im.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        Complex64::new(
            f64::from_le_bytes(bytes[..8].try_into().unwrap()),
            f64::from_le_bytes(bytes[8..16].try_into().unwrap()),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4<T> {
    shape: Shape4,
    data: Vec<T>,
}

pub type RealTensor4 = Tensor4<f64>;
pub type ComplexTensor4 = Tensor4<Complex64>;

impl<T: Scalar> Tensor4<T> {
    pub fn zeros(shape: Shape4) -> Self {
        Tensor4 {
            shape,
            data: vec![T::default(); shape.len()],
        }
    }

    pub fn filled(shape: Shape4, value: T) -> Self {
        Tensor4 {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape4, data: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.len() {
            return Err(Error::shape(
                "Tensor4::from_vec",
                format!("{} elements for {shape}", shape.len()),
                data.len(),
            ));
        }
        Ok(Tensor4 { shape, data })
    }

    pub fn from_fn(shape: Shape4, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for s in 0..shape.s {
            for c in 0..shape.c {
                for y in 0..shape.h {
                    for x in 0..shape.w {
                        data.push(f(s, c, y, x));
                    }
                }
            }
        }
        Tensor4 { shape, data }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, s: usize, c: usize, y: usize, x: usize) -> T {
        self.data[self.shape.index(s, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, s: usize, c: usize, y: usize, x: usize, v: T) {
        let i = self.shape.index(s, c, y, x);
        self.data[i] = v;
    }

    pub fn plane(&self, s: usize, c: usize) -> &[T] {
        let n = self.shape.plane_len();
        let start = (s * self.shape.c + c) * n;
        &self.data[start..start + n]
    }

    pub fn plane_mut(&mut self, s: usize, c: usize) -> &mut [T] {
        let n = self.shape.plane_len();
        let start = (s * self.shape.c + c) * n;
        &mut self.data[start..start + n]
    }

    /// Same data viewed under a different shape of equal length.
    pub fn reshape(self, shape: Shape4) -> Result<Self> {
        if shape.len() != self.data.len() {
            return Err(Error::shape("reshape", self.shape, shape));
        }
        Ok(Tensor4 { shape, data: self.data })
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(Scalar::is_finite)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor4<U> {
        Tensor4 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Samples `range` out of the batch dimension.
    pub fn batch_slice(&self, range: std::ops::Range<usize>) -> Self {
        let per = self.shape.c * self.shape.plane_len();
        Tensor4 {
            shape: self.shape.with_batch(range.len()),
            data: self.data[range.start * per..range.end * per].to_vec(),
        }
    }

    /// Gathers the listed samples into a new batch.
    pub fn gather_batch(&self, indices: &[usize]) -> Self {
        let per = self.shape.c * self.shape.plane_len();
        let mut data = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            data.extend_from_slice(&self.data[i * per..(i + 1) * per]);
        }
        Tensor4 {
            shape: self.shape.with_batch(indices.len()),
            data,
        }
    }

    /// Serializes as a 32-byte header followed by little-endian payload.
    ///
    /// Header: magic `SCLC`, version, `s c h w` as u32, dtype, reserved.
    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        let mut buf = Vec::with_capacity(TENSOR_HEADER_LEN + self.data.len() * T::BYTES);
        encode_header::<T>(self.shape, &mut buf);
        for v in &self.data {
            v.write_le(&mut buf);
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Inverse of [`Tensor4::write_to`]. `offset` is the stream position of
    /// the header, used only for error reporting.
    pub fn read_from(input: &mut impl Read, offset: u64) -> Result<Self> {
        let mut header = [0u8; TENSOR_HEADER_LEN];
        read_exact_at(input, &mut header, offset)?;
        if &header[0..4] != TENSOR_MAGIC {
            return Err(Error::format(offset, "bad tensor magic"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != TENSOR_VERSION {
            return Err(Error::format(
                offset + 4,
                format!("unsupported tensor version {version}"),
            ));
        }
        let shape = Shape4::new(
            word(8) as usize,
            word(12) as usize,
            word(16) as usize,
            word(20) as usize,
        );
        let dtype = word(24);
        if dtype != T::DTYPE {
            return Err(Error::format(
                offset + 24,
                format!("dtype {dtype} does not match expected {}", T::DTYPE),
            ));
        }
        shape.validate().map_err(|e| Error::format(offset + 8, e.to_string()))?;
        let payload_offset = offset + TENSOR_HEADER_LEN as u64;
        let mut payload = vec![0u8; shape.len() * T::BYTES];
        read_exact_at(input, &mut payload, payload_offset)?;
        let data = payload.chunks_exact(T::BYTES).map(T::read_le).collect();
        Ok(Tensor4 { shape, data })
    }
}

pub const TENSOR_MAGIC: &[u8; 4] = b"SCLC";
pub const TENSOR_VERSION: u32 = 1;
pub const TENSOR_HEADER_LEN: usize = 32;

fn encode_header<T: Scalar>(shape: Shape4, buf: &mut Vec<u8>) {
    buf.extend_from_slice(TENSOR_MAGIC);
    for word in [
        TENSOR_VERSION,
        shape.s as u32,
        shape.c as u32,
        shape.h as u32,
        shape.w as u32,
        T::DTYPE,
        0,
    ] {
        buf.extend_from_slice(&word.to_le_bytes());
    }
}

pub(crate) fn read_exact_at(input: &mut impl Read, buf: &mut [u8], offset: u64) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::format(offset, format!("truncated: needed {} more bytes", buf.len()))
        }
        _ => Error::Io(e),
    })
}

impl RealTensor4 {
    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| v * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape("add", self.shape, other.shape));
        }
        Ok(Tensor4 {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn to_complex(&self) -> ComplexTensor4 {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexTensor4 {
    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| v * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape("add", self.shape, other.shape));
        }
        Ok(Tensor4 {
            shape: self.shape,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Real inner product `Re Σ conj(a)·b`, the pairing under which the
    /// backward passes are adjoints.
    pub fn real_dot(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// How the operands of [`elementwise_mul`] are aligned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BroadcastRule {
    /// Shapes must match exactly.
    None,
    /// `b` has batch 1 and is reused for every sample of `a` (kernels).
    BatchOf,
    /// `a` has one channel and is reused for every channel of `b` (inputs).
    ChannelOf,
}

pub fn elementwise_mul(a: &ComplexTensor4, b: &ComplexTensor4, rule: BroadcastRule) -> Result<ComplexTensor4> {
    let (sa, sb) = (a.shape, b.shape);
    let out_shape = match rule {
        BroadcastRule::None if sa == sb => sa,
        BroadcastRule::BatchOf if sb.s == 1 && sa.with_batch(1) == sb => sa,
        BroadcastRule::ChannelOf if sa.c == 1 && sb.with_channels(1) == sa => sb,
        _ => return Err(Error::shape("elementwise_mul", sa, sb)),
    };
    let mut out = ComplexTensor4::zeros(out_shape);
    for s in 0..out_shape.s {
        for c in 0..out_shape.c {
            let pa = match rule {
                BroadcastRule::ChannelOf => a.plane(s, 0),
                _ => a.plane(s, c),
            };
            let pb = match rule {
                BroadcastRule::BatchOf => b.plane(0, c),
                _ => b.plane(s, c),
            };
            for ((o, x), y) in out.plane_mut(s, c).iter_mut().zip(pa).zip(pb) {
                *o = x * y;
            }
        }
    }
    Ok(out)
}

pub fn conj(t: &ComplexTensor4) -> ComplexTensor4 {
    t.map(|v| v.conj())
}

pub fn real_part(t: &ComplexTensor4) -> RealTensor4 {
    t.map(|v| v.re)
}

/// Places each `k×k` kernel plane at the origin corner of a zero `h×w`
/// plane, the layout under which the DFT product is circular convolution.
pub fn pad_spatial(k: &RealTensor4, h: usize, w: usize) -> Result<RealTensor4> {
    let ks = k.shape;
    if ks.h > h || ks.w > w {
        return Err(Error::InvalidPad { shape: ks, h, w });
    }
    let out_shape = ks.with_hw(h, w);
    let mut out = RealTensor4::zeros(out_shape);
    for s in 0..ks.s {
        for c in 0..ks.c {
            let src = k.plane(s, c);
            let dst = out.plane_mut(s, c);
            for y in 0..ks.h {
                dst[y * w..y * w + ks.w].copy_from_slice(&src[y * ks.w..(y + 1) * ks.w]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pad_spatial`]: keeps the top-left `kh×kw` block of each plane.
pub fn restrict_spatial(t: &RealTensor4, kh: usize, kw: usize) -> Result<RealTensor4> {
    let ts = t.shape;
    if kh > ts.h || kw > ts.w {
        return Err(Error::InvalidCrop {
            shape: ts,
            h: kh,
            w: kw,
        });
    }
    Ok(Tensor4::from_fn(ts.with_hw(kh, kw), |s, c, y, x| t.get(s, c, y, x)))
}
