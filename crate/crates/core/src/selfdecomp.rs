//! Self-decomposable examples: powers of inverse Gamma variables, the
//! log-Beta law with its spectral function, and the multiplicative
//! factorization of `X_{1/n}` into inverse Gamma variables.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ks::ks_two_sample;
use crate::numeric::special::ln_gamma;
use crate::numeric::Sample;
use crate::sign::bell::{verify_bell_shape_with, BellShapeReport, GridOptions};
use crate::sign::{locate_zeros_with, Endpoints, SignPattern};
use crate::stable::{sample_gamma, sample_stable, Alpha};
use crate::wbs::ProfileRow;

/// Largest derivative order of the closed forms below.
pub const MAX_ORDER: usize = 12;

const STEP: f64 = 1.5;

fn check_order(n: usize) -> Result<()> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge { order: n, cap: MAX_ORDER });
    }
    Ok(())
}

/// `Σ c_j z^j` and `Σ |c_j z^j|`.
fn poly_eval(c: &[f64], z: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut m = 0.0;
    for ci in c.iter().rev() {
        v = v * z + ci;
        m = m * z.abs() + ci.abs();
    }
    (v, m)
}

/// Walks `x` by factors of `step` until `pred` holds at four consecutive
/// points, returning the last one.
fn settle(mut x: f64, step: f64, pred: impl Fn(f64) -> bool) -> Result<f64> {
    let mut streak = 0;
    for _ in 0..4000 {
        if pred(x) {
            streak += 1;
            if streak == 4 {
                return Ok(x);
            }
        } else {
            streak = 0;
        }
        x *= step;
    }
    Err(Error::NonConvergence {
        x,
        order: 0,
        reason: "no sampling range where one term dominates".into(),
    })
}

/// The law of `Γ_t^{-a}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvGammaPower {
    pub t: f64,
    pub a: f64,
}

impl InvGammaPower {
    pub fn new(t: f64, a: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite() && a >= 1.0 && a.is_finite()) {
            return Err(Error::InvalidInput(format!("need t > 0 and a >= 1, got t = {t}, a = {a}")));
        }
        Ok(Self { t, a })
    }

    fn gamma0(&self) -> f64 {
        1.0 + self.t / self.a
    }

    /// Coefficients of `P_n` in `d^{(n)}(x) = C e^{-z} x^{-γ_0-n} P_n(z)`
    /// with `z = x^{-1/a}`.
    pub fn derivative_polynomial(&self, n: usize) -> Vec<f64> {
        let inv_a = 1.0 / self.a;
        let mut c = vec![1.0];
        for step in 0..n {
            let g = self.gamma0() + step as f64;
            let mut next = vec![0.0; c.len() + 1];
            for (j, cj) in c.iter().enumerate() {
                next[j] -= (g + j as f64 * inv_a) * cj;
                next[j + 1] += inv_a * cj;
            }
            c = next;
        }
        c
    }

    fn ln_const(&self) -> f64 {
        -self.a.ln() - ln_gamma(self.t)
    }

    fn eval_with(&self, poly: &[f64], x: f64, n: usize) -> Result<Sample> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidInput(format!("x must be positive, got {x}")));
        }
        let ln_x = x.ln();
        let z = (-ln_x / self.a).exp();
        let (p, mag) = poly_eval(poly, z);
        let ln_pref = self.ln_const() - z - (self.gamma0() + n as f64) * ln_x;
        let pref = ln_pref.exp();
        let eps = f64::EPSILON;
        // rounding in Horner plus the relative error of exp(ln_pref)
        let rel = eps * (4.0 + ln_pref.abs() + z + (self.gamma0() + n as f64) * ln_x.abs());
        let value = pref * p;
        Ok(Sample::new(value, pref * mag * (2.0 * poly.len() as f64 + 2.0) * eps + value.abs() * rel))
    }

    /// `d^{(n)}(x)` with a rounding bound.
    pub fn derivative_sample(&self, x: f64, n: usize) -> Result<Sample> {
        check_order(n)?;
        self.eval_with(&self.derivative_polynomial(n), x, n)
    }

    /// Where the sign of `P_n(z)` is settled by its extreme terms: the
    /// leading power for large `z` (small `x`), the constant for small `z`.
    pub fn range(&self, n: usize) -> Result<(f64, f64)> {
        let c = self.derivative_polynomial(n);
        let lead = |z: f64| {
            let top = c[n].abs() * z.powi(n as i32);
            let rest: f64 = c[..n].iter().enumerate().map(|(j, cj)| cj.abs() * z.powi(j as i32)).sum();
            top > 2.0 * rest
        };
        let constant = |z: f64| {
            let rest: f64 = c[1..].iter().enumerate().map(|(j, cj)| cj.abs() * z.powi(j as i32 + 1)).sum();
            c[0].abs() > 2.0 * rest
        };
        let z_hi = settle(1.0, STEP, lead)?;
        let z_lo = settle(1.0, 1.0 / STEP, constant)?;
        Ok((z_hi.powf(-self.a), z_lo.powf(-self.a)))
    }
}

pub fn inv_gamma_power_derivative(p: &InvGammaPower, x: f64, n: usize) -> Result<f64> {
    Ok(p.derivative_sample(x, n)?.value)
}

pub fn verify_invgamma_bellshape(p: &InvGammaPower, max_order: usize, opts: &GridOptions) -> Result<BellShapeReport> {
    check_order(max_order)?;
    let polys: Vec<Vec<f64>> = (0..=max_order).map(|n| p.derivative_polynomial(n)).collect();
    verify_bell_shape_with(
        &format!("inverse gamma power, t = {}, a = {}", p.t, p.a),
        None,
        max_order,
        |x, n| p.eval_with(&polys[n], x, n),
        |n| {
            let (lo, hi) = match opts.range {
                Some(r) => r,
                None => p.range(n)?,
            };
            opts.build(lo, hi)
        },
    )
}

/// The law of `-log β_{a,b}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBetaExample {
    pub a: f64,
    pub b: f64,
}

impl LogBetaExample {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 1.0 && b.is_finite()) {
            return Err(Error::InvalidInput(format!("need a > 0 and b > 1, got a = {a}, b = {b}")));
        }
        Ok(Self { a, b })
    }

    fn ln_norm(&self) -> f64 {
        ln_gamma(self.a + self.b) - ln_gamma(self.a) - ln_gamma(self.b)
    }

    /// Coefficients of `P_n` in
    /// `f^{(n)}(x) = B u^a (1-u)^{b-1-n} P_n(u)` with `u = e^{-x}`.
    pub fn derivative_polynomial(&self, n: usize) -> Vec<f64> {
        let mut c = vec![1.0];
        for step in 0..n {
            let mut next = vec![0.0; c.len() + 1];
            for (j, cj) in c.iter().enumerate() {
                let aj = self.a + j as f64;
                next[j] -= aj * cj;
                next[j + 1] += (aj + self.b - 1.0 - step as f64) * cj;
            }
            c = next;
        }
        c
    }

    fn eval_with(&self, poly: &[f64], x: f64, n: usize) -> Result<Sample> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidInput(format!("x must be positive, got {x}")));
        }
        let u = (-x).exp();
        // log-space prefactor keeps (1 - e^{-x})^{b-1-n} accurate near 0
        let ln_one_minus_u = (-(-x).exp_m1()).ln();
        let e = self.b - 1.0 - n as f64;
        let ln_pref = self.ln_norm() - self.a * x + e * ln_one_minus_u;
        let pref = ln_pref.exp();
        let (p, mag) = poly_eval(poly, u);
        let eps = f64::EPSILON;
        let rel = eps * (4.0 + ln_pref.abs() + self.a * x + e.abs() * ln_one_minus_u.abs());
        let value = pref * p;
        Ok(Sample::new(value, pref * mag * (2.0 * poly.len() as f64 + 2.0) * eps + value.abs() * rel))
    }

    pub fn derivative_sample(&self, x: f64, n: usize) -> Result<Sample> {
        check_order(n)?;
        self.eval_with(&self.derivative_polynomial(n), x, n)
    }

    /// Sampling range for `f^{(n)}`: at the left `P_n(u)` is within half
    /// of `P_n(1)` in relative terms, at the right its constant term
    /// dominates, each over four consecutive steps.
    pub fn range(&self, n: usize) -> Result<(f64, f64)> {
        let c = self.derivative_polynomial(n);
        let at_one: f64 = c.iter().sum();
        let lo = if at_one == 0.0 {
            1e-8
        } else {
            settle(1.0, 1.0 / STEP, |x| {
                let u = (-x).exp();
                let drift: f64 = c.iter().enumerate().map(|(j, cj)| cj.abs() * (1.0 - u.powi(j as i32))).sum();
                at_one.abs() > 2.0 * drift
            })?
        };
        let hi = settle(1.0, STEP, |x| {
            let u = (-x).exp();
            let rest: f64 = c[1..].iter().enumerate().map(|(j, cj)| cj.abs() * u.powi(j as i32 + 1)).sum();
            c[0].abs() > 2.0 * rest
        })?;
        Ok((lo, hi))
    }

    pub fn spectral(&self) -> SpectralFunction {
        let e = *self;
        SpectralFunction {
            k_zero_plus: self.b,
            eval: Box::new(move |x| spectral_k(&e, x)),
        }
    }
}

pub fn log_beta_density(e: &LogBetaExample, x: f64, n: usize) -> Result<f64> {
    Ok(e.derivative_sample(x, n)?.value)
}

/// `k_{a,b}(x) = e^{-ax} (1 - e^{-bx}) / (1 - e^{-x})`. Written with
/// `expm1`, the ratio stays accurate down to the smallest positive `x`
/// and tends to `b`.
pub fn spectral_k(e: &LogBetaExample, x: f64) -> f64 {
    (-e.a * x).exp() * ((-e.b * x).exp_m1() / (-x).exp_m1())
}

/// A spectral function `k` on `(0, ∞)` with its limit at `0+`.
pub struct SpectralFunction {
    pub k_zero_plus: f64,
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SpectralFunction {
    pub fn value(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Whether `k` never increases along the given increasing points.
    pub fn is_non_increasing(&self, xs: &[f64]) -> bool {
        let v: Vec<f64> = xs.iter().map(|x| self.value(*x)).collect();
        v.windows(2).all(|w| w[1] <= w[0])
    }
}

impl std::fmt::Debug for SpectralFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralFunction").field("k_zero_plus", &self.k_zero_plus).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjectureReport {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub profiles: Vec<ProfileRow>,
    pub pass: bool,
}

/// Checks `f_{a,b}^{(i)} ∼ a_i` for `i = 0..=n`, the profiles expected
/// when `k(0+) = b > n + 1`.
pub fn conjecture2_probe(e: &LogBetaExample, n: usize, opts: &GridOptions) -> Result<ConjectureReport> {
    if !(e.b > n as f64 + 1.0) {
        return Err(Error::InvalidInput(format!("the hypothesis needs b > n + 1, got b = {}, n = {n}", e.b)));
    }
    check_order(n)?;
    let mut profiles = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let poly = e.derivative_polynomial(i);
        let (lo, hi) = match opts.range {
            Some(r) => r,
            None => e.range(i)?,
        };
        let grid = opts.build(lo, hi)?;
        let z = locate_zeros_with(|x| e.eval_with(&poly, x, i), &grid, Endpoints::vanishing())
            .map_err(|err| err.at_order(i))?;
        let expected = SignPattern::pattern_a(i);
        profiles.push(ProfileRow {
            order: i,
            pass: z.sign_profile == expected,
            observed: z.sign_profile.clone(),
            expected,
            zero_count: z.count(),
            zeros: z.locations(),
        });
    }
    let pass = profiles.iter().all(|p| p.pass);
    Ok(ConjectureReport {
        a: e.a,
        b: e.b,
        n,
        profiles,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorCheck {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub ks_distance: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Default KS threshold for the factorization checks.
pub const KS_THRESHOLD: f64 = 0.01;

/// `n^{-n} Π_{j=1}^{n-1} Γ_{j/n}^{-1}`, each Gamma factor from its own
/// seed derived from `seed`.
pub fn inverse_gamma_product(n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let scale = (n as f64).powi(-(n as i32));
    let mut out = vec![scale; samples];
    for j in 1..n {
        let g = sample_gamma(j as f64 / n as f64, seed.wrapping_add(j as u64), samples)?;
        for (o, v) in out.iter_mut().zip(g) {
            *o /= v;
        }
    }
    Ok(out)
}

/// Two-sample KS distance between `X_{1/n}` and the inverse Gamma product.
pub fn integer_alpha_factorization_mc(n: usize, samples: usize, seed: u64) -> Result<FactorCheck> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("n must be at least 2, got {n}")));
    }
    if samples < 10_000 {
        return Err(Error::InvalidInput(format!("at least 10000 samples are required, got {samples}")));
    }
    let stable = sample_stable(Alpha::new(1.0 / n as f64)?, seed, samples)?;
    let product = inverse_gamma_product(n, samples, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1))?;
    let d = ks_two_sample(&stable, &product);
    Ok(FactorCheck {
        n,
        samples,
        seed,
        ks_distance: d,
        threshold: KS_THRESHOLD,
        pass: d < KS_THRESHOLD,
    })
}
