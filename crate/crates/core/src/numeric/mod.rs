//! Shared numerical plumbing: error-free summation, quadrature and a few
//! special functions.

pub mod compensated;
pub mod ks;
pub mod quadrature;
pub mod special;

pub use compensated::NeumaierSum;

/// A function value together with an absolute error bound.
///
/// Sign decisions downstream treat `|value| <= err` as "indistinguishable
/// from zero".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub err: f64,
}

impl Sample {
    pub fn new(value: f64, err: f64) -> Self {
        Self { value, err }
    }

    /// A value whose only error is a few roundings.
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            err: 4.0 * f64::EPSILON * value.abs(),
        }
    }
}

/// `n` logarithmically spaced points on `[lo, hi]`, endpoints included.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| (a + step * i as f64).exp()).collect();
    out[0] = lo;
    out[n - 1] = hi;
    out
}

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(hi > lo && n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}
