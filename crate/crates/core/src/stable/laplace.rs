//! Numerical Laplace transform of the stable density, used as a check on
//! the normalisation `E[exp(-λX)] = exp(-λ^α)`.

use crate::error::{Error, Result};
use crate::numeric::quadrature::{integrate_pieces, QuadResult, QuadratureConfig};
use crate::stable::series::{tail_mass, SeriesConfig, StableDensity};
use crate::stable::Alpha;

/// Largest `x` on the far left below which the density is dropped. The
/// density increases on `(0, mode)`, so the dropped mass is at most
/// `x_lo f(x_lo)`.
fn left_cutoff(d: &StableDensity, target: f64) -> Result<(f64, f64)> {
    let mut x = 1.0;
    let mut fx = d.density(x)?.value;
    loop {
        let next = x / 2.0;
        let fn_ = d.density(next)?.value;
        if fn_ < fx && next * fn_ < target {
            return Ok((next, next * fn_));
        }
        if next < 1e-300 {
            return Err(Error::NonConvergence {
                x: next,
                order: 0,
                reason: "no left cutoff found for the Laplace integral".into(),
            });
        }
        x = next;
        fx = fn_;
    }
}

/// `∫_0^∞ e^{-λx} f_α(x) dx` with an error estimate.
///
/// The integral is taken in `t = ln x` over `[ln x_lo, ln x_hi]` in unit
/// pieces. The left remainder is bounded by monotonicity; the right
/// remainder uses the tail-mass series, damped by `e^{-λ x_hi}`.
pub fn laplace_transform_detailed(a: Alpha, lambda: f64, quad: &QuadratureConfig) -> Result<QuadResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    let cfg = SeriesConfig::default();
    let d = StableDensity::new(a, cfg)?;
    let (x_lo, left_err) = left_cutoff(&d, quad.abs_tol * 1e-3)?;
    let x_hi = if lambda > 0.0 { (60.0 / lambda).max(50.0) } else { 1e3 };
    let (t_lo, t_hi) = (x_lo.ln(), x_hi.ln());
    let pieces = ((t_hi - t_lo).ceil() as usize).max(1);
    let breaks: Vec<f64> = (0..=pieces)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / pieces as f64)
        .collect();
    let mut r = integrate_pieces(
        |t| {
            let x = t.exp();
            Ok((-lambda * x).exp() * d.density(x)?.value * x)
        },
        &breaks,
        quad,
    )?;
    let tail = tail_mass(a, x_hi, &cfg)?;
    let damp = (-lambda * x_hi).exp();
    if lambda == 0.0 {
        r.value += tail.value;
        r.error += tail.err;
    } else {
        // 0 <= remainder <= e^{-λ x_hi} P(X > x_hi)
        r.value += 0.5 * damp * tail.value;
        r.error += 0.5 * damp * tail.value + tail.err;
    }
    r.error += left_err;
    Ok(r)
}

/// `∫_0^∞ e^{-λx} f_α(x) dx`.
pub fn laplace_transform_numeric(a: Alpha, lambda: f64, quad: &QuadratureConfig) -> Result<f64> {
    laplace_transform_detailed(a, lambda, quad).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_at_one() {
        let v = laplace_transform_numeric(Alpha::half(), 1.0, &QuadratureConfig::default()).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn total_mass() {
        for a in [0.3, 0.5, 0.8] {
            let r = laplace_transform_detailed(Alpha::new(a).unwrap(), 0.0, &QuadratureConfig::default())
                .unwrap();
            assert!((r.value - 1.0).abs() < 1e-8, "alpha={a}: {}", r.value);
        }
    }

    #[test]
    fn rejects_negative_lambda() {
        let r = laplace_transform_numeric(Alpha::half(), -1.0, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
