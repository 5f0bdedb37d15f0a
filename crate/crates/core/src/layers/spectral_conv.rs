use num_complex::Complex64;

use super::GradBundle;
use crate::error::{Error, Result};
use crate::fft::fft2_plane;
use crate::tensor::{ComplexTensor4, RealTensor4, Shape4};

/// Convolution as a per-frequency product with padded kernel spectra.
///
/// Kernels are stored spatially as `(C_out, C_in, k, k)`; their spectra at
/// the input resolution are computed on construction.
#[derive(Clone, Debug)]
pub struct SpectralConvLayer {
    kernels: RealTensor4,
    spectra: ComplexTensor4,
    input_hw: (usize, usize),
}

impl SpectralConvLayer {
    pub fn new(kernels: RealTensor4, input_hw: (usize, usize)) -> Result<Self> {
        let (h, w) = input_hw;
        if !kernels.all_finite() {
            return Err(Error::NonFinite {
                context: "spectral conv kernels".into(),
            });
        }
        let ks = kernels.shape();
        if ks.h > h || ks.w > w {
            return Err(Error::InvalidPad { shape: ks, h, w });
        }
        // pad straight into the complex buffer and transform in place
        let mut spectra = ComplexTensor4::zeros(ks.with_hw(h, w));
        for o in 0..ks.s {
            for c in 0..ks.c {
                let dst = spectra.plane_mut(o, c);
                for (y, row) in kernels.plane(o, c).chunks_exact(ks.w).enumerate() {
                    for (d, &v) in dst[y * w..y * w + ks.w].iter_mut().zip(row) {
                        *d = Complex64::new(v, 0.0);
                    }
                }
                fft2_plane(dst, h, w, false)?;
            }
        }
        Ok(SpectralConvLayer {
            kernels,
            spectra,
            input_hw,
        })
    }

    pub fn kernels(&self) -> &RealTensor4 {
        &self.kernels
    }

    pub fn spectra(&self) -> &ComplexTensor4 {
        &self.spectra
    }

    pub fn input_hw(&self) -> (usize, usize) {
        self.input_hw
    }

    pub fn c_out(&self) -> usize {
        self.kernels.shape().s
    }

    pub fn c_in(&self) -> usize {
        self.kernels.shape().c
    }

    fn check_input(&self, x: Shape4, op: &'static str) -> Result<()> {
        let (h, w) = self.input_hw;
        if x.c != self.c_in() || x.h != h || x.w != w {
            return Err(Error::shape(op, format!("(S, {}, {h}, {w})", self.c_in()), x));
        }
        Ok(())
    }

    /// `Y[s,o] = Σ_c X[s,c] ⊙ K[o,c]`.
    pub fn forward(&self, x: &ComplexTensor4) -> Result<ComplexTensor4> {
        let xs = x.shape();
        self.check_input(xs, "spectral_conv_forward")?;
        let mut y = ComplexTensor4::zeros(xs.with_channels(self.c_out()));
        for s in 0..xs.s {
            for o in 0..self.c_out() {
                let out = y.plane_mut(s, o);
                for c in 0..self.c_in() {
                    let k = self.spectra.plane(o, c);
                    for ((acc, xv), kv) in out.iter_mut().zip(x.plane(s, c)).zip(k) {
                        *acc += xv * kv;
                    }
                }
            }
        }
        Ok(y)
    }

    /// Returns `σ_X = Σ_o σ_Y ⊙ conj(K)` as the input gradient and the
    /// spatial kernel gradient under `"kernel"`.
    ///
    /// The kernel gradient is `Re(F*(Σ_s σ_Y ⊙ conj(X0)))` sampled on the
    /// `k×k` support, where `F*` is the unnormalized inverse transform (the
    /// adjoint of the unnormalized forward FFT applied to the padded kernel).
    pub fn backward(&self, x0: &ComplexTensor4, sigma_y: &ComplexTensor4) -> Result<GradBundle<ComplexTensor4>> {
        let xs = x0.shape();
        self.check_input(xs, "spectral_conv_backward")?;
        let expected = xs.with_channels(self.c_out());
        if sigma_y.shape() != expected {
            return Err(Error::shape("spectral_conv_backward", expected, sigma_y.shape()));
        }
        let (h, w) = self.input_hw;
        let ks = self.kernels.shape();

        let mut sigma_x = ComplexTensor4::zeros(xs);
        for s in 0..xs.s {
            for c in 0..self.c_in() {
                let out = sigma_x.plane_mut(s, c);
                for o in 0..self.c_out() {
                    let k = self.spectra.plane(o, c);
                    for ((acc, g), kv) in out.iter_mut().zip(sigma_y.plane(s, o)).zip(k) {
                        *acc += g * kv.conj();
                    }
                }
            }
        }

        let mut kernel_grad = RealTensor4::zeros(ks);
        let mut delta = vec![Complex64::default(); h * w];
        for o in 0..self.c_out() {
            for c in 0..self.c_in() {
                delta.iter_mut().for_each(|d| *d = Complex64::default());
                for s in 0..xs.s {
                    for ((d, g), xv) in delta.iter_mut().zip(sigma_y.plane(s, o)).zip(x0.plane(s, c)) {
                        *d += g * xv.conj();
                    }
                }
                fft2_plane(&mut delta, h, w, true)?;
                let dst = kernel_grad.plane_mut(o, c);
                for a in 0..ks.h {
                    for b in 0..ks.w {
                        dst[a * ks.w + b] = delta[a * w + b].re;
                    }
                }
            }
        }

        Ok(GradBundle {
            input_grad: sigma_x,
            param_grads: vec![("kernel", kernel_grad)],
        })
    }
}
