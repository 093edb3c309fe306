//! Integral representation of the stable density, used where the series
//! needs too many terms (α close to 1 at moderate x).
//!
//! With `K(u) = (sin αu / sin u)^{1/(1-α)} sin((1-α)u) / sin αu` and
//! `β = α/(1-α)`, `P(X ≤ x) = (1/π) ∫_0^π exp(-K(u) x^{-β}) du`, so
//!
//! ```text
//! f^{(n)}(x) = (β/π) x^{-β-1-n} ∫_0^π K e^{-K y} P_n(K y) du,   y = x^{-β},
//! ```
//!
//! where `P_0 = 1` and each derivative maps `z^j` to
//! `-(γ + jβ) z^j + β z^{j+1}` with `γ = β + 1 + (order so far)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::quadrature::{integrate_pieces, QuadratureConfig};
use crate::numeric::Sample;
use crate::stable::Alpha;

/// `ln K(u)` for `u ∈ (0, π)`.
pub fn ln_kanter(alpha: f64, u: f64) -> f64 {
    // sin u loses relative accuracy near π unless reflected
    let sin_u = if u > PI / 2.0 { (PI - u).sin() } else { u.sin() };
    let sin_au = (alpha * u).sin();
    let sin_bu = ((1.0 - alpha) * u).sin();
    (sin_au.ln() - sin_u.ln()) / (1.0 - alpha) + sin_bu.ln() - sin_au.ln()
}

/// `K(0+) = (1-α) α^{α/(1-α)}`, the minimum of `K`.
pub fn kanter_at_zero(alpha: f64) -> f64 {
    (1.0 - alpha) * alpha.powf(alpha / (1.0 - alpha))
}

/// Coefficients of `P_n`, lowest degree first.
pub fn derivative_polynomial(alpha: f64, n: usize) -> Vec<f64> {
    let beta = alpha / (1.0 - alpha);
    let mut c = vec![1.0];
    for step in 0..n {
        let gamma = beta + 1.0 + step as f64;
        let mut next = vec![0.0; c.len() + 1];
        for (j, cj) in c.iter().enumerate() {
            next[j] -= (gamma + j as f64 * beta) * cj;
            next[j + 1] += beta * cj;
        }
        c = next;
    }
    c
}

fn breakpoints() -> Vec<f64> {
    // geometric refinement toward both ends, where the integrand
    // concentrates for small and for large x respectively
    let mut b = vec![0.0];
    for k in (1..=40).rev() {
        b.push(PI / 2.0 * 0.5f64.powi(k));
    }
    b.push(PI / 2.0);
    for k in 1..=40 {
        b.push(PI - PI / 2.0 * 0.5f64.powi(k));
    }
    b.push(PI);
    b
}

/// `f_α^{(n)}(x)` by quadrature of the integral representation.
pub fn integral_derivative(a: Alpha, x: f64, n: usize, quad: &QuadratureConfig) -> Result<Sample> {
    let alpha = a.value();
    let beta = alpha / (1.0 - alpha);
    let ln_y = -beta * x.ln();
    let y = ln_y.exp();
    let k0 = kanter_at_zero(alpha);
    let poly = derivative_polynomial(alpha, n);
    // integrand scaled by e^{K0 y}; the factor comes back in log space
    let integrand = |u: f64, absolute: bool| -> f64 {
        let lk = ln_kanter(alpha, u);
        let k = lk.exp();
        let z = k * y;
        let damp = (-(k - k0) * y).exp();
        if damp == 0.0 || !z.is_finite() {
            return 0.0;
        }
        let mut p = 0.0;
        let mut zj = 1.0;
        for c in &poly {
            p += if absolute { (c * zj).abs() } else { c * zj };
            zj *= z;
        }
        k * damp * p
    };
    let ln_scale = (beta / PI).ln() - (beta + 1.0 + n as f64) * x.ln() - k0 * y;
    if ln_scale < -800.0 {
        // below the double-precision range whatever the integral is
        return Ok(Sample::new(0.0, 0.0));
    }
    let breaks = breakpoints();
    let coarse = QuadratureConfig {
        abs_tol: 0.0,
        rel_tol: 1e-6,
        max_subdivisions: quad.max_subdivisions,
    };
    let abs = integrate_pieces(|u| Ok(integrand(u, true)), &breaks, &coarse)?;
    // ln K carries absolute rounding of a few ulps, which the factor
    // e^{-K y} amplifies by about K y; no quadrature can beat that noise
    let noise = 16.0 * f64::EPSILON * (1.0 + 4.0 * k0 * y + n as f64);
    let fine = QuadratureConfig {
        abs_tol: noise.max(2e-15) * abs.value,
        rel_tol: 1e-13,
        max_subdivisions: quad.max_subdivisions,
    };
    let signed = integrate_pieces(|u| Ok(integrand(u, false)), &breaks, &fine).map_err(|e| match e {
        Error::QuadratureFailure { reason, .. } => Error::NonConvergence {
            x,
            order: n,
            reason: format!("integral representation: {reason}"),
        },
        other => other,
    })?;
    let scale = ln_scale.exp();
    let rounding = (noise + 8.0 * (n + 2) as f64 * f64::EPSILON) * abs.value;
    Ok(Sample::new(
        scale * signed.value,
        scale * (signed.error + rounding + 1e-15 * signed.value.abs()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::closed_form::closed_form_half;

    #[test]
    fn matches_half_closed_form() {
        let q = QuadratureConfig::default();
        for n in 0..=4 {
            for x in [0.02, 0.1, 1.0 / 6.0, 1.0, 10.0] {
                let s = integral_derivative(Alpha::half(), x, n, &q).unwrap();
                let want = closed_form_half(x, n);
                assert!((s.value - want).abs() < 1e-11 * want.abs().max(1e-3 * closed_form_half(x, 0)), "n={n} x={x}: {} vs {want}", s.value);
                assert!((s.value - want).abs() <= s.err.max(1e-12 * want.abs()) * 10.0, "n={n} x={x}: err {}", s.err);
            }
        }
    }

    #[test]
    fn kanter_minimum() {
        for a in [0.2, 0.5, 0.9] {
            let k = ln_kanter(a, 1e-6).exp();
            assert!((k - kanter_at_zero(a)).abs() < 1e-9);
            assert!(ln_kanter(a, 1.0) > ln_kanter(a, 0.5));
        }
    }

    #[test]
    fn first_polynomial() {
        // P_1(z) = -(β+1) + β z
        let p = derivative_polynomial(0.5, 1);
        assert_eq!(p, vec![-2.0, 1.0]);
    }
}
