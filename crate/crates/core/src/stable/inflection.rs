//! Where `log f_α` changes from concave to convex.

use crate::error::Result;
use crate::numeric::Sample;
use crate::sign::{locate_zeros, Grid, ZeroSet};
use crate::stable::{Alpha, SeriesConfig, StableDensity};

/// `f'' f - f'^2`, which has the sign of `(log f)''`, with its error
/// propagated from the three evaluations.
pub fn log_concavity_sample(d: &StableDensity, x: f64) -> Result<Sample> {
    let f = d.sample(x, 0)?;
    let f1 = d.sample(x, 1)?;
    let f2 = d.sample(x, 2)?;
    let a = f2.value * f.value;
    let b = f1.value * f1.value;
    let err = f2.value.abs() * f.err
        + f.value.abs() * f2.err
        + 2.0 * f1.value.abs() * f1.err
        + f2.err * f.err
        + f1.err * f1.err
        + 2.0 * f64::EPSILON * (a.abs() + b.abs());
    Ok(Sample::new(a - b, err))
}

/// Zeros of `(log f_α)''` on the grid. Exploratory: the number of
/// inflection points is recorded, not asserted.
pub fn log_density_inflection_probe(a: Alpha, grid: &Grid, cfg: &SeriesConfig) -> Result<ZeroSet> {
    let d = StableDensity::new(a, *cfg)?;
    locate_zeros(|x| log_concavity_sample(&d, x), grid)
}
