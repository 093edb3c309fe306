//! Exact simulation of one-sided stable and Gamma variates.
//!
//! Stable variates use Kanter's representation
//! `X = (A(U) / E)^{(1-α)/α}` with `U ~ Uniform(0, π)`, `E ~ Exp(1)` and
//! `A(u) = (sin(αu)/sin u)^{1/(1-α)} sin((1-α)u) / sin(αu)`, which gives
//! `E[exp(-λX)] = exp(-λ^α)`.

use std::f64::consts::PI;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};

use crate::error::{Error, Result};
use crate::stable::Alpha;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw of `X_α` from the given generator.
pub fn draw_stable<R: Rng + ?Sized>(a: Alpha, rng: &mut R) -> f64 {
    let alpha = a.value();
    let v: f64 = rng.sample(Open01);
    let u = PI * v;
    let e: f64 = rng.sample(Exp1);
    let ln_a = ((alpha * u).sin().ln() - u.sin().ln()) / (1.0 - alpha) + ((1.0 - alpha) * u).sin().ln()
        - (alpha * u).sin().ln();
    (((1.0 - alpha) / alpha) * (ln_a - e.ln())).exp()
}

/// `count` i.i.d. samples of `X_α`, deterministic in `seed`.
pub fn sample_stable(a: Alpha, seed: u64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..count).map(|_| draw_stable(a, &mut rng)).collect())
}

/// `count` i.i.d. samples of `Γ_t` (unit scale). Shapes below one are
/// handled by the generator's boost transform.
pub fn sample_gamma(shape: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    let g = Gamma::new(shape, 1.0).map_err(|e| Error::InvalidInput(format!("gamma shape {shape}: {e}")))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..count).map(|_| g.sample(&mut rng)).collect())
}
