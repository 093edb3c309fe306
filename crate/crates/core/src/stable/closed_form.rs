//! The explicit density at alpha = 1/2,
//! `f(x) = x^{-3/2} e^{-1/(4x)} / (2 sqrt(pi))`, and its derivatives.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::numeric::Sample;

/// Exact coefficients `b_m` with
/// `f^{(n)}(x) = x^{-3/2} e^{-1/(4x)} / (2 sqrt(pi)) * sum_m b_m x^{-m}`.
pub fn half_prefactor(n: usize) -> Vec<BigRational> {
    let mut b = vec![BigRational::from_integer(BigInt::from(1))];
    let three_halves = BigRational::new(BigInt::from(3), BigInt::from(2));
    let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
    for _ in 0..n {
        let mut next = vec![BigRational::zero(); b.len() + 2];
        for (m, c) in b.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            // d/dx x^{-m-3/2} e^{-1/(4x)}
            //   = e^{-1/(4x)} [ -(m+3/2) x^{-m-5/2} + (1/4) x^{-m-7/2} ]
            let mm = BigRational::from_integer(BigInt::from(m)) + &three_halves;
            next[m + 1] -= &mm * c;
            next[m + 2] += &quarter * c;
        }
        b = next;
    }
    while b.len() > 1 && b.last().is_some_and(|c| c.is_zero()) {
        b.pop();
    }
    b
}

/// n-th derivative of the alpha = 1/2 density, with a rounding bound.
pub fn closed_form_half_sample(x: f64, n: usize) -> Sample {
    assert!(x > 0.0, "closed_form_half needs x > 0");
    let coeffs: Vec<f64> = half_prefactor(n)
        .iter()
        .map(|c| c.to_f64().unwrap_or(f64::NAN))
        .collect();
    let u = 1.0 / x;
    let mut poly = 0.0;
    let mut abs_poly = 0.0;
    for c in coeffs.iter().rev() {
        poly = poly * u + c;
        abs_poly = abs_poly * u + c.abs();
    }
    let pref = (-1.5 * x.ln() - 0.25 * u).exp() / (2.0 * PI.sqrt());
    let value = pref * poly;
    let err = pref * abs_poly * f64::EPSILON * (4.0 * coeffs.len() as f64 + 8.0);
    Sample::new(value, err)
}

/// n-th derivative of `f_{1/2}(x) = x^{-3/2} e^{-1/(4x)} / (2 sqrt(pi))`.
pub fn closed_form_half(x: f64, n: usize) -> f64 {
    closed_form_half_sample(x, n).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_one() {
        let expected = (-0.25f64).exp() / (2.0 * PI.sqrt());
        assert!((closed_form_half(1.0, 0) - expected).abs() < 1e-16);
        assert!((closed_form_half(1.0, 0) - 0.219_695_644_733_861_3).abs() < 1e-15);
    }

    #[test]
    fn value_at_four() {
        let expected = 4f64.powf(-1.5) * (-1.0f64 / 16.0).exp() / (2.0 * PI.sqrt());
        assert!((closed_form_half(4.0, 0) - expected).abs() < 1e-16);
    }

    #[test]
    fn mode_at_one_sixth() {
        let v = closed_form_half(1.0 / 6.0, 1);
        let scale = closed_form_half(1.0 / 6.0, 0) * 6.0;
        assert!(v.abs() < 1e-14 * scale, "{v}");
    }

    #[test]
    fn inflections() {
        let s10 = 10f64.sqrt();
        for x in [1.0 / (10.0 + 2.0 * s10), 1.0 / (10.0 - 2.0 * s10)] {
            let v = closed_form_half(x, 2);
            let scale = closed_form_half(x, 0) / (x * x);
            assert!(v.abs() < 1e-13 * scale, "{x}: {v}");
        }
    }

    #[test]
    fn prefactor_of_first_derivative() {
        // f' = f * (-3/(2x) + 1/(4x^2))
        let b = half_prefactor(1);
        assert_eq!(b.len(), 3);
        assert!(b[0].is_zero());
        assert_eq!(b[1], BigRational::new((-3).into(), 2.into()));
        assert_eq!(b[2], BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for n in 0..5 {
            for x in [0.1, 0.4, 2.0] {
                let h = 1e-5 * x;
                let fd = (closed_form_half(x + h, n) - closed_form_half(x - h, n)) / (2.0 * h);
                let d = closed_form_half(x, n + 1);
                assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "n={n} x={x}");
            }
        }
    }
}
