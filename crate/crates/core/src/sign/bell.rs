use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Sample;
use crate::sign::pattern::SignPattern;
use crate::sign::zeros::{
    locate_zeros_with, strictly_interlace, Endpoints, Grid, GridSummary, ZeroSet, DEFAULT_GRID_POINTS,
    DEFAULT_REFINEMENT_DEPTH,
};
use crate::stable::{Alpha, SeriesConfig, StableDensity};

/// How grids are chosen for each derivative order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub points: usize,
    pub refinement_depth: usize,
    /// Absolute floor under which samples count as zero, on top of each
    /// sample's own error bound.
    pub zero_tolerance: f64,
    /// The automatic left end is placed where `|f^{(n)}|` has fallen below
    /// this fraction of its largest sampled magnitude.
    pub left_floor: f64,
    /// Fixed `[lo, hi]` instead of the automatic range.
    pub range: Option<(f64, f64)>,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            refinement_depth: DEFAULT_REFINEMENT_DEPTH,
            zero_tolerance: 0.0,
            left_floor: 1e-60,
            range: None,
        }
    }
}

impl GridOptions {
    pub fn build(&self, lo: f64, hi: f64) -> Result<Grid> {
        let (lo, hi) = self.range.unwrap_or((lo, hi));
        Ok(Grid::log(lo, hi, self.points)?
            .with_refinement_depth(self.refinement_depth)
            .with_zero_tolerance(self.zero_tolerance))
    }
}

const STEP: f64 = 1.5;

/// Automatic range for `f_α^{(n)}`.
///
/// Right end: twice the first point (scanning up by factors of 1.5) where
/// the first series term outweighs twice the sum of the others; the sign
/// is fixed from there on. Left end: scanning down from the right end, the
/// first point where the value is strictly positive, has decreased over
/// three consecutive steps and is below `left_floor` times the largest
/// magnitude seen.
pub fn stable_range(d: &StableDensity, n: usize, left_floor: f64) -> Result<(f64, f64)> {
    let mut x = 1.0;
    while !d.first_term_dominates(x, n) {
        x *= STEP;
        if x > 1e200 {
            return Err(Error::NonConvergence {
                x,
                order: n,
                reason: "no range where the leading term dominates".into(),
            });
        }
    }
    while x > 1e-3 && d.first_term_dominates(x / STEP, n) {
        x /= STEP;
    }
    let hi = 2.0 * x;
    let mut peak: f64 = 0.0;
    let mut history: Vec<f64> = Vec::new();
    let mut x = hi;
    loop {
        let s = d.sample(x, n)?;
        if s.value == 0.0 && peak > 0.0 {
            // underflow: the previous point is as far left as doubles reach
            return Ok((x * STEP, hi));
        }
        peak = peak.max(s.value.abs());
        history.push(s.value);
        let k = history.len();
        let decreasing = k >= 4 && (0..3).all(|j| history[k - 1 - j] < history[k - 2 - j]);
        if s.value > s.err && decreasing && s.value < left_floor * peak {
            return Ok((x, hi));
        }
        x /= STEP;
        if x < 1e-300 {
            return Err(Error::NonConvergence {
                x,
                order: n,
                reason: "no left end found for the sampling range".into(),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderResult {
    pub n: usize,
    pub zero_count: usize,
    pub expected: usize,
    pub pass: bool,
    pub zero_set: ZeroSet,
    pub grid: GridSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellShapeReport {
    pub subject: String,
    pub alpha: Option<f64>,
    pub max_order: usize,
    pub per_order: Vec<OrderResult>,
    /// Zeros of consecutive passing orders strictly interlace.
    pub interlacing: bool,
    pub pass: bool,
}

impl BellShapeReport {
    pub fn counts(&self) -> Vec<usize> {
        self.per_order.iter().map(|o| o.zero_count).collect()
    }

    /// One row per zero: `order,zero_index,location,bracket_width,pass`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
        out.write_record(["order", "zero_index", "location", "bracket_width", "pass"])
            .map_err(io)?;
        for o in &self.per_order {
            for (i, z) in o.zero_set.zeros.iter().enumerate() {
                out.write_record([
                    o.n.to_string(),
                    i.to_string(),
                    format!("{:.17e}", z.location),
                    format!("{:.3e}", z.bracket_width),
                    o.pass.to_string(),
                ])
                .map_err(io)?;
            }
        }
        out.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))?;
        Ok(())
    }
}

/// Checks that the `n`-th derivative of a density vanishes exactly `n`
/// times with profile `a_n`, for `n = 1..=max_order`, using the supplied
/// evaluator and per-order grid. Both endpoint limits are zero.
pub fn verify_bell_shape_with<F, G>(
    subject: &str,
    alpha: Option<f64>,
    max_order: usize,
    eval: F,
    grid_for: G,
) -> Result<BellShapeReport>
where
    F: Fn(f64, usize) -> Result<Sample> + Sync,
    G: Fn(usize) -> Result<Grid>,
{
    let mut per_order = Vec::with_capacity(max_order);
    for n in 1..=max_order {
        let g = grid_for(n)?;
        let z = locate_zeros_with(|x| eval(x, n), &g, Endpoints::vanishing()).map_err(|e| e.at_order(n))?;
        let pass = z.count() == n && z.sign_profile == SignPattern::pattern_a(n);
        per_order.push(OrderResult {
            n,
            zero_count: z.count(),
            expected: n,
            pass,
            zero_set: z,
            grid: g.summary(),
        });
    }
    let interlacing = per_order.windows(2).all(|w| {
        !(w[0].pass && w[1].pass) || strictly_interlace(&w[0].zero_set.locations(), &w[1].zero_set.locations())
    });
    let pass = interlacing && per_order.iter().all(|o| o.pass);
    Ok(BellShapeReport {
        subject: subject.to_string(),
        alpha,
        max_order,
        per_order,
        interlacing,
        pass,
    })
}

/// Bell-shape check for `f_α`.
pub fn verify_bell_shape(a: Alpha, max_order: usize, opts: &GridOptions, cfg: &SeriesConfig) -> Result<BellShapeReport> {
    if max_order > cfg.max_order {
        return Err(Error::OrderTooLarge {
            order: max_order,
            cap: cfg.max_order,
        });
    }
    let d = StableDensity::new(a, *cfg)?;
    verify_bell_shape_with(
        &format!("one-sided stable density, alpha = {}", a.value()),
        Some(a.value()),
        max_order,
        |x, n| d.sample(x, n),
        |n| {
            let (lo, hi) = match opts.range {
                Some(r) => r,
                None => stable_range(&d, n, opts.left_floor)?,
            };
            opts.build(lo, hi)
        },
    )
}
