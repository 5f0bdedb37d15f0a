#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sclc_core::oracle::{central_diff, max_rel_err};
use sclc_core::{ComplexTensor4, RealTensor4, Shape4};

pub const EPS: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Entries smaller than this are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn real(shape: Shape4, rng: &mut ChaCha8Rng) -> RealTensor4 {
    RealTensor4::from_fn(shape, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

pub fn complex(shape: Shape4, rng: &mut ChaCha8Rng) -> ComplexTensor4 {
    ComplexTensor4::from_fn(shape, |_, _, _, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

/// Real tensor whose entries sit at least `margin` away from zero.
pub fn away_from_zero(shape: Shape4, margin: f64, rng: &mut ChaCha8Rng) -> RealTensor4 {
    RealTensor4::from_fn(shape, |_, _, _, _| {
        let m = rng.gen_range(margin..1.0);
        if rng.gen_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

pub fn with_data(shape: Shape4, v: &[f64]) -> RealTensor4 {
    RealTensor4::from_vec(shape, v.to_vec()).unwrap()
}

/// Asserts the analytic gradient matches central differences of `f` at `x`.
pub fn assert_grad(what: &str, x: &[f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) {
    let numeric = central_diff(x, EPS, f);
    let err = max_rel_err(analytic, &numeric, GRAD_FLOOR);
    assert!(err < GRAD_TOL, "{what}: max relative error {err:e}");
}

/// Like [`assert_grad`] for piecewise-smooth functions (relu, max pool).
/// Coordinates whose central differences at `EPS` and `EPS / 10` disagree
/// straddle a kink or a tie and are skipped; at most a quarter may be.
pub fn assert_grad_piecewise(what: &str, x: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64) {
    let coarse = central_diff(x, EPS, &mut f);
    let fine = central_diff(x, EPS / 10.0, &mut f);
    let smooth: Vec<usize> = (0..x.len())
        .filter(|&i| max_rel_err(&coarse[i..=i], &fine[i..=i], GRAD_FLOOR * 10.0) < GRAD_TOL)
        .collect();
    assert!(
        smooth.len() * 4 >= x.len() * 3,
        "{what}: {} of {} coordinates near kinks",
        x.len() - smooth.len(),
        x.len()
    );
    let a: Vec<f64> = smooth.iter().map(|&i| analytic[i]).collect();
    let n: Vec<f64> = smooth.iter().map(|&i| coarse[i]).collect();
    let err = max_rel_err(&a, &n, GRAD_FLOOR);
    assert!(err < GRAD_TOL, "{what}: max relative error {err:e}");
}
