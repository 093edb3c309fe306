//! The additive factorization `X_α = Y_α + Σ_n Exp(κ_n)`: rates, the
//! spectral function of the exponential-mixture factor and the identity
//! `λ^α = Ψ_ME(λ) + Ψ_sum(λ)` between Lévy exponents.
//!
//! The factor `Y_α` has Lévy density
//! `l_α(x) = ∫_0^∞ (c_α u^α - [c_α u^α]) e^{-xu} du`, whose sawtooth jumps
//! at `κ_m = (m / c_α)^{1/α}`, the same points as the exponential rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::quadrature::{integrate, integrate_pieces, QuadratureConfig};
use crate::numeric::special::binomial;
use crate::numeric::{NeumaierSum, Sample};
use crate::stable::Alpha;

/// `κ_n = (nπ / sin πα)^{1/α}`.
pub fn kappa(a: Alpha, n: usize) -> f64 {
    assert!(n >= 1, "rates are indexed from 1");
    (n as f64 / a.c()).powf(1.0 / a.value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateSequence {
    pub alpha: Alpha,
    pub n_terms: usize,
    pub rates: Vec<f64>,
}

impl RateSequence {
    pub fn new(a: Alpha, n_terms: usize) -> Result<Self> {
        if n_terms == 0 {
            return Err(Error::InvalidInput("at least one rate is required".into()));
        }
        Ok(Self {
            alpha: a,
            n_terms,
            rates: (1..=n_terms).map(|n| kappa(a, n)).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Relative accuracy asked of each evaluation.
    pub tolerance: f64,
    pub max_segments: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_segments: 2_000_000,
        }
    }
}

/// The spectral function `l_α` with its quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralL {
    pub alpha: Alpha,
    pub cfg: SpectralConfig,
}

impl SpectralL {
    pub fn new(alpha: Alpha, cfg: SpectralConfig) -> Self {
        Self { alpha, cfg }
    }

    /// Jump point `κ_m` of the sawtooth, with `κ_0 = 0`.
    pub fn breakpoint(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            kappa(self.alpha, m)
        }
    }

    fn segment_cfg(&self) -> QuadratureConfig {
        QuadratureConfig {
            abs_tol: 0.0,
            rel_tol: self.cfg.tolerance * 1e-2,
            max_subdivisions: 200,
        }
    }
}

/// Breakpoints for the first segment `[0, b]` against the weight
/// `e^{-xu}`: a split at the decay scale `40/x` and geometric refinement
/// toward the `u^α` cusp at 0.
fn segment_breaks(b: f64, x: f64) -> Vec<f64> {
    let knee = (40.0 / x).min(b);
    let mut out = vec![0.0];
    out.extend((1..=60).rev().map(|k| knee * 0.5f64.powi(k)));
    out.push(knee);
    if knee < b {
        out.push(b);
    }
    out
}

/// `l_α(x)`, integrated segment by segment between jump points. Each
/// segment's sawtooth lies in `[0, 1)`, so the part beyond `κ_M` is at
/// most `e^{-x κ_M}/x`; summation stops once that is negligible.
pub fn spectral_l(s: &SpectralL, x: f64) -> Result<Sample> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidInput(format!("x must be positive, got {x}")));
    }
    let (alpha, c) = (s.alpha.value(), s.alpha.c());
    let qc = s.segment_cfg();
    let mut total = NeumaierSum::new();
    let mut err = 0.0;
    for m in 0..s.cfg.max_segments {
        let (a, b) = (s.breakpoint(m), s.breakpoint(m + 1));
        let mf = m as f64;
        let seg = if m == 0 {
            integrate_pieces(
                |u| Ok((c * u.powf(alpha)).min(1.0) * (-x * u).exp()),
                &segment_breaks(b, x),
                &qc,
            )?
        } else {
            // t = c u^α - m keeps the sawtooth exact; du/dt = u / (α (m + t))
            let scale = (-x * a).exp();
            let knee = (40.0 * alpha * mf / (x * a)).min(1.0);
            let breaks: Vec<f64> = if knee < 1.0 { vec![0.0, knee, 1.0] } else { vec![0.0, 1.0] };
            let seg_cfg = QuadratureConfig {
                // the weights (b - a) e^{-xa} add up to about 1/x, the
                // scale of l(x) where many segments contribute
                abs_tol: 5e-3 * s.cfg.tolerance * (b - a),
                ..qc
            };
            let mut r = integrate_pieces(
                |t| {
                    let u = ((mf + t) / c).powf(1.0 / alpha);
                    Ok(t * (-x * (u - a)).exp() * u / (alpha * (mf + t)))
                },
                &breaks,
                &seg_cfg,
            )?;
            r.value *= scale;
            r.error *= scale;
            r
        };
        total.add(seg.value);
        err += seg.error;
        let tail = (-x * b).exp() / x;
        if tail <= s.cfg.tolerance * total.value() {
            return Ok(Sample::new(total.value(), err + tail + total.error_bound()));
        }
    }
    Err(Error::QuadratureFailure {
        a: 0.0,
        b: s.breakpoint(s.cfg.max_segments),
        reason: format!("tail bound not reached within {} segments", s.cfg.max_segments),
    })
}

/// `Ψ_ME(λ) = ∫_0^∞ (1 - e^{-λx}) l_α(x) dx`.
///
/// Swapping the integrals gives `∫_0^∞ frac(c_α u^α) λ/(u(u+λ)) du`. In
/// `v = c_α u^α` each segment `[m, m+1]` has the smooth integrand
/// `(v - m) λ / (α v (u(v) + λ))`. Beyond `v = M` the sawtooth is replaced
/// by its mean `1/2`, giving `½ log(1 + λ/κ_M)`, plus the Euler–Maclaurin
/// correction `-h(M)/12` where `h` is the smooth factor; the remainder is
/// of order `h(M)/M²`.
pub fn me_exponent(s: &SpectralL, lambda: f64) -> Result<Sample> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be nonnegative, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(Sample::exact(0.0));
    }
    let (alpha, c) = (s.alpha.value(), s.alpha.c());
    let u_of = |v: f64| (v / c).powf(1.0 / alpha);
    let h = |v: f64| lambda / (alpha * v * (u_of(v) + lambda));
    let qc = s.segment_cfg();
    let mut total = NeumaierSum::new();
    let mut err = 0.0;
    for m in 0..s.cfg.max_segments {
        let mf = m as f64;
        let seg = if m == 0 {
            // (v - 0) h(v) = λ / (α (u + λ)), finite at v = 0
            integrate(|v| Ok(lambda / (alpha * (u_of(v) + lambda))), 0.0, 1.0, &qc)?
        } else {
            integrate(|v| Ok((v - mf) * h(v)), mf, mf + 1.0, &qc)?
        };
        total.add(seg.value);
        err += seg.error;
        let big_m = (m + 1) as f64;
        let hm = h(big_m);
        let remainder = hm / (big_m * big_m);
        if m >= 8 && remainder <= s.cfg.tolerance * total.value() {
            let kappa_m = u_of(big_m);
            let tail = 0.5 * (lambda / kappa_m).ln_1p() - hm / 12.0;
            total.add(tail);
            return Ok(Sample::new(total.value(), err + remainder + total.error_bound()));
        }
    }
    Err(Error::QuadratureFailure {
        a: 0.0,
        b: f64::INFINITY,
        reason: format!("exponent tail not reached within {} segments", s.cfg.max_segments),
    })
}

/// `Ψ_ME(λ)` by the direct double integral `∫ (1 - e^{-λx}) l_α(x) dx`,
/// taken in `t = ln x`. Slow; used to validate [`me_exponent`].
pub fn me_exponent_direct(s: &SpectralL, lambda: f64, quad: &QuadratureConfig) -> Result<f64> {
    let alpha = s.alpha.value();
    // l(x) <= 1/x near 0 and l(x) ~ C x^{-α-1} at infinity; the window
    // below drops less than the requested tolerance for moderate λ
    let t_lo = (quad.abs_tol / lambda).ln();
    let t_hi = (1.0 / quad.abs_tol).ln() / alpha;
    let pieces = ((t_hi - t_lo) / 2.0).ceil() as usize;
    let breaks: Vec<f64> = (0..=pieces)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / pieces as f64)
        .collect();
    let r = crate::numeric::quadrature::integrate_pieces(
        |t| {
            let x = t.exp();
            Ok(-(-lambda * x).exp_m1() * spectral_l(s, x)?.value * x)
        },
        &breaks,
        quad,
    )?;
    Ok(r.value)
}

/// Truncated `Ψ_sum(λ) = Σ_{n ≤ N} log(1 + λ/κ_n)` and the closed-form
/// bound `λ Σ_{n>N} 1/κ_n ≤ λ c_α^{1/α} N^{1-1/α} / (1/α - 1)` on what is
/// left out.
pub fn expsum_exponent(r: &RateSequence, lambda: f64) -> (f64, f64) {
    if lambda == 0.0 {
        return (0.0, 0.0);
    }
    let mut acc = NeumaierSum::new();
    for k in r.rates.iter().rev() {
        acc.add((lambda / k).ln_1p());
    }
    (acc.value(), expsum_tail_bound(r.alpha, lambda, r.n_terms))
}

pub fn expsum_tail_bound(a: Alpha, lambda: f64, n: usize) -> f64 {
    let inv = 1.0 / a.value();
    lambda * a.c().powf(inv) * (n as f64).powf(1.0 - inv) / (inv - 1.0)
}

/// `Σ_{n ≤ N} log(1 + λ/κ_n)` without storing the rates.
pub fn expsum_truncated(a: Alpha, lambda: f64, n: usize) -> f64 {
    let mut acc = NeumaierSum::new();
    for k in (1..=n).rev() {
        acc.add((lambda / kappa(a, k)).ln_1p());
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentIdentityReport {
    pub alpha: f64,
    pub lambda: f64,
    pub n_terms: usize,
    pub psi_me: f64,
    pub psi_me_error: f64,
    pub psi_sum: f64,
    pub tail_correction: f64,
    /// `λ^α - psi_me - psi_sum - tail_correction`
    pub residual: f64,
}

pub fn factorization_residual(a: Alpha, lambda: f64, n_terms: usize, cfg: &SpectralConfig) -> Result<ExponentIdentityReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let s = SpectralL::new(a, *cfg);
    let me = me_exponent(&s, lambda)?;
    let rates = RateSequence::new(a, n_terms)?;
    let (psi_sum, tail) = expsum_exponent(&rates, lambda);
    Ok(ExponentIdentityReport {
        alpha: a.value(),
        lambda,
        n_terms,
        psi_me: me.value,
        psi_me_error: me.err,
        psi_sum,
        tail_correction: tail,
        residual: lambda.powf(a.value()) - me.value - psi_sum - tail,
    })
}

/// For `k = 0..=max_order`, whether `(-1)^k Δ_h^k f(x0) ≥ -tol`, where the
/// tolerance collects the evaluation errors through the difference.
pub fn complete_monotonicity_probe<F>(f: F, x0: f64, h: f64, max_order: usize) -> Result<Vec<bool>>
where
    F: Fn(f64) -> Result<Sample>,
{
    if !(x0 > 0.0 && h > 0.0) {
        return Err(Error::InvalidInput("x0 and h must be positive".into()));
    }
    let vals: Vec<Sample> = (0..=max_order).map(|j| f(x0 + j as f64 * h)).collect::<Result<_>>()?;
    Ok((0..=max_order)
        .map(|k| {
            let mut diff = NeumaierSum::new();
            let mut tol = 0.0;
            for (j, v) in vals.iter().enumerate().take(k + 1) {
                let w = binomial(k, j);
                let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
                diff.add(sign * w * v.value);
                tol += w * (v.err + 4.0 * f64::EPSILON * v.value.abs());
            }
            let signed = if k % 2 == 0 { diff.value() } else { -diff.value() };
            signed >= -(tol + diff.error_bound())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn half() -> SpectralL {
        SpectralL::new(Alpha::half(), SpectralConfig::default())
    }

    #[test]
    fn rates_at_half() {
        let a = Alpha::half();
        assert!((kappa(a, 1) - PI * PI).abs() < 1e-12);
        assert!((kappa(a, 3) - 9.0 * PI * PI).abs() < 1e-11);
        let r = RateSequence::new(a, 50).unwrap();
        assert!(r.rates.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rate_growth_exponent() {
        for a in [0.3, 0.6, 0.9] {
            let al = Alpha::new(a).unwrap();
            let slope = (kappa(al, 10_000).ln() - kappa(al, 10).ln()) / (1000f64).ln();
            assert!((slope - 1.0 / a).abs() < 0.01 / a);
        }
    }

    #[test]
    fn spectral_l_nonnegative_and_decreasing() {
        let s = SpectralL::new(Alpha::new(0.4).unwrap(), SpectralConfig::default());
        let mut prev = f64::INFINITY;
        for x in [0.01, 0.1, 1.0, 10.0] {
            let v = spectral_l(&s, x).unwrap().value;
            assert!(v >= 0.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn spectral_l_large_x() {
        // x^{α+1} l(x) → α / Γ(1-α) = 1/(2 sqrt π) at α = 1/2
        let x = 1e3;
        let v = spectral_l(&half(), x).unwrap().value * x.powf(1.5);
        assert!((v - 0.5 / PI.sqrt()).abs() < 1e-3 * v, "{v}");
        let far = 1e12;
        let w = spectral_l(&half(), far).unwrap().value * far.powf(1.5);
        assert!((w - 0.5 / PI.sqrt()).abs() < 1e-9, "{w}");
    }

    #[test]
    fn spectral_l_small_x_half_mean() {
        // the sawtooth averages 1/2, so x l(x) → 1/2
        let x = 1e-3;
        let v = spectral_l(&half(), x).unwrap().value * x;
        assert!((v - 0.5).abs() < 0.02, "{v}");
    }

    #[test]
    fn me_exponent_half_sinh_oracle() {
        for lambda in [0.3, 1.0, 4.0] {
            let z = f64::sqrt(lambda);
            let expected = z - (z.sinh() / z).ln();
            let v = me_exponent(&half(), lambda).unwrap();
            assert!((v.value - expected).abs() < 1e-9, "λ={lambda}: {} vs {expected}", v.value);
        }
        assert_eq!(me_exponent(&half(), 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn me_exponent_matches_direct_double_integral() {
        let q = QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-9,
            max_subdivisions: 4000,
        };
        for a in [0.3, 0.5] {
            let s = SpectralL::new(Alpha::new(a).unwrap(), SpectralConfig::default());
            let fast = me_exponent(&s, 2.0).unwrap().value;
            let slow = me_exponent_direct(&s, 2.0, &q).unwrap();
            assert!((fast - slow).abs() < 1e-6, "α={a}: {fast} vs {slow}");
        }
    }

    #[test]
    fn me_exponent_increasing() {
        let s = SpectralL::new(Alpha::new(0.7).unwrap(), SpectralConfig::default());
        let mut prev = 0.0;
        for lambda in [0.1, 0.5, 2.0, 8.0] {
            let v = me_exponent(&s, lambda).unwrap().value;
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn expsum_sinh_oracle() {
        let r = RateSequence::new(Alpha::half(), 10_000).unwrap();
        for lambda in [1.0, 4.0] {
            let (v, tail) = expsum_exponent(&r, lambda);
            let z = f64::sqrt(lambda);
            let expected = (z.sinh() / z).ln();
            assert!(((v + tail) - expected).abs() < 1e-8 * expected);
            assert!(v < expected && expected < v + tail * 1.0001);
        }
        assert_eq!(expsum_exponent(&r, 0.0), (0.0, 0.0));
    }

    #[test]
    fn identity_small_lambda() {
        // almost all of λ^α comes from the mixture factor when λ is small
        let rep = factorization_residual(Alpha::new(0.4).unwrap(), 1e-6, 1000, &SpectralConfig::default()).unwrap();
        assert!(rep.psi_sum < 1e-4 * rep.psi_me);
        assert!(rep.residual.abs() < 1e-10 * 1e-6f64.powf(0.4));
    }

    #[test]
    fn monotonicity_probe_examples() {
        let exp = |x: f64| Ok(Sample::exact((-x).exp()));
        assert!(complete_monotonicity_probe(exp, 0.5, 0.3, 8).unwrap().iter().all(|b| *b));
        let sin = |x: f64| Ok(Sample::exact(x.sin()));
        assert!(complete_monotonicity_probe(sin, 1.0, 1.0, 6).unwrap().contains(&false));
    }
}
