use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{logspace, Sample};
use crate::sign::pattern::{sign_of, SignPattern, SignSymbol};

/// Sampling grid for zero location.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    refinement_depth: usize,
    /// Absolute floor below which a value counts as zero. Each sample's
    /// own error bound is applied on top of it.
    zero_tolerance: f64,
}

/// Summary of a grid for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSummary {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub refinement_depth: usize,
    pub zero_tolerance: f64,
}

pub const DEFAULT_REFINEMENT_DEPTH: usize = 60;
pub const DEFAULT_GRID_POINTS: usize = 2000;

impl Grid {
    pub fn new(points: Vec<f64>, refinement_depth: usize, zero_tolerance: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("grid must have at least one point".into()));
        }
        if points.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput("grid points must be positive and finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid points must be strictly increasing".into()));
        }
        if !(zero_tolerance >= 0.0) {
            return Err(Error::InvalidInput("zero_tolerance must be nonnegative".into()));
        }
        Ok(Self {
            points,
            refinement_depth,
            zero_tolerance,
        })
    }

    /// `n` log-spaced points on `[lo, hi]` with default refinement and no
    /// tolerance floor beyond the samples' error bounds.
    pub fn log(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && n >= 2) {
            return Err(Error::InvalidInput(format!("bad log grid [{lo}, {hi}] with {n} points")));
        }
        Self::new(logspace(lo, hi, n), DEFAULT_REFINEMENT_DEPTH, 0.0)
    }

    pub fn with_zero_tolerance(mut self, tol: f64) -> Self {
        self.zero_tolerance = tol;
        self
    }

    pub fn with_refinement_depth(mut self, depth: usize) -> Self {
        self.refinement_depth = depth;
        self
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn refinement_depth(&self) -> usize {
        self.refinement_depth
    }

    pub fn zero_tolerance(&self) -> f64 {
        self.zero_tolerance
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            lo: self.points[0],
            hi: *self.points.last().expect("nonempty"),
            points: self.points.len(),
            refinement_depth: self.refinement_depth,
            zero_tolerance: self.zero_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zero {
    pub location: f64,
    pub bracket_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSet {
    pub zeros: Vec<Zero>,
    pub sign_profile: SignPattern,
}

impl ZeroSet {
    pub fn count(&self) -> usize {
        self.zeros.len()
    }

    pub fn locations(&self) -> Vec<f64> {
        self.zeros.iter().map(|z| z.location).collect()
    }

    pub fn negate(&self) -> Self {
        Self {
            zeros: self.zeros.clone(),
            sign_profile: self.sign_profile.negate(),
        }
    }
}

/// Endpoint limit symbols; `None` takes the symbol of the outermost sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Endpoints {
    pub left: Option<SignSymbol>,
    pub right: Option<SignSymbol>,
}

impl Endpoints {
    pub fn vanishing() -> Self {
        Self {
            left: Some(SignSymbol::Zero),
            right: Some(SignSymbol::Zero),
        }
    }
}

fn classify(s: &Sample, floor: f64) -> SignSymbol {
    sign_of(s.value, s.err.max(floor))
}

/// A sign change between two points with opposite strict signs.
struct Bracket {
    a: f64,
    b: f64,
    sa: SignSymbol,
}

/// Points strictly inside a cell, used when a cell needs a closer look.
const PROBE_POINTS: usize = 32;
const PROBE_LEVELS: usize = 3;

fn scan<F>(f: &F, xs: &[f64], sym: &[SignSymbol], floor: f64, level: usize, out: &mut Vec<Bracket>) -> Result<()>
where
    F: Fn(f64) -> Result<Sample> + Sync,
{
    let strict: Vec<usize> = (0..xs.len()).filter(|&i| sym[i].is_strict()).collect();
    for w in strict.windows(2) {
        let (i, j) = (w[0], w[1]);
        if j == i + 1 {
            if sym[i] != sym[j] {
                out.push(Bracket {
                    a: xs[i],
                    b: xs[j],
                    sa: sym[i],
                });
            }
            continue;
        }
        // a run of samples indistinguishable from zero between i and j
        if sym[i] != sym[j] {
            out.push(Bracket {
                a: xs[i],
                b: xs[j],
                sa: sym[i],
            });
            continue;
        }
        if level >= PROBE_LEVELS {
            return Err(Error::AmbiguousZero {
                location: 0.5 * (xs[i] + xs[j]),
                order: None,
            });
        }
        let (a, b) = (xs[i], xs[j]);
        let mut sub = vec![a];
        sub.extend((1..=PROBE_POINTS).map(|k| a + (b - a) * k as f64 / (PROBE_POINTS + 1) as f64));
        sub.push(b);
        let samples: Vec<Sample> = sub[1..=PROBE_POINTS]
            .par_iter()
            .map(|&x| f(x))
            .collect::<Result<_>>()?;
        let mut sub_sym = vec![sym[i]];
        sub_sym.extend(samples.iter().map(|s| classify(s, floor)));
        sub_sym.push(sym[j]);
        scan(f, &sub, &sub_sym, floor, level + 1, out)?;
    }
    Ok(())
}

fn bisect<F>(f: &F, br: &Bracket, depth: usize, floor: f64) -> Result<Zero>
where
    F: Fn(f64) -> Result<Sample>,
{
    let (mut a, mut b) = (br.a, br.b);
    for _ in 0..depth {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let s = classify(&f(m)?, floor);
        if s == SignSymbol::Zero {
            // the midpoint cannot be told apart from a zero; the bracket
            // [a, b] still has opposite strict signs at its ends
            break;
        }
        if s == br.sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Zero {
        location: 0.5 * (a + b),
        bracket_width: b - a,
    })
}

/// Locates the sign changes of `f` on the grid, with endpoint limits taken
/// from the outermost samples.
pub fn locate_zeros<F>(f: F, g: &Grid) -> Result<ZeroSet>
where
    F: Fn(f64) -> Result<Sample> + Sync,
{
    locate_zeros_with(f, g, Endpoints::default())
}

/// Locates the sign changes of `f` on the grid and assembles the sign
/// profile with the given endpoint limits.
///
/// A run of samples indistinguishable from zero between samples of the
/// same sign is probed more finely; if that does not reveal a sign change
/// the result is `AmbiguousZero`. Runs at either end of the grid are
/// attributed to the endpoint limit.
pub fn locate_zeros_with<F>(f: F, g: &Grid, ends: Endpoints) -> Result<ZeroSet>
where
    F: Fn(f64) -> Result<Sample> + Sync,
{
    let xs = g.points();
    let floor = g.zero_tolerance();
    let samples: Vec<Sample> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let sym: Vec<SignSymbol> = samples.iter().map(|s| classify(s, floor)).collect();
    let mut brackets = Vec::new();
    scan(&f, xs, &sym, floor, 0, &mut brackets)?;
    let zeros: Vec<Zero> = brackets
        .par_iter()
        .map(|br| bisect(&f, br, g.refinement_depth(), floor))
        .collect::<Result<_>>()?;

    let left = ends.left.unwrap_or(sym[0]);
    let right = ends.right.unwrap_or(*sym.last().expect("nonempty grid"));
    let mut profile = vec![left];
    if let Some(first) = sym.iter().find(|s| s.is_strict()) {
        profile.push(*first);
        for br in &brackets {
            profile.push(SignSymbol::Zero);
            profile.push(br.sa.negate());
        }
    }
    profile.push(right);
    Ok(ZeroSet {
        zeros,
        sign_profile: SignPattern::new(profile),
    })
}

/// True iff the profile equals `p` exactly.
pub fn match_pattern(z: &ZeroSet, p: &SignPattern) -> bool {
    z.sign_profile == *p
}

/// Strict interlacing of consecutive zero sets: `next` has exactly one
/// more zero than `prev` and `next[0] < prev[0] < next[1] < ... < next[m]`.
pub fn strictly_interlace(prev: &[f64], next: &[f64]) -> bool {
    if next.len() != prev.len() + 1 {
        return false;
    }
    prev.iter()
        .enumerate()
        .all(|(i, p)| next[i] < *p && *p < next[i + 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::closed_form::closed_form_half_sample;

    fn half_grid() -> Grid {
        Grid::log(1e-3, 1e3, 2000).unwrap()
    }

    #[test]
    fn mode_of_half() {
        let z = locate_zeros_with(|x| Ok(closed_form_half_sample(x, 1)), &half_grid(), Endpoints::vanishing()).unwrap();
        assert_eq!(z.count(), 1);
        assert!((z.zeros[0].location - 1.0 / 6.0).abs() < 1e-12);
        assert!(match_pattern(&z, &SignPattern::pattern_a(1)));
    }

    #[test]
    fn inflections_of_half() {
        let z = locate_zeros_with(|x| Ok(closed_form_half_sample(x, 2)), &half_grid(), Endpoints::vanishing()).unwrap();
        let r = 10f64.sqrt();
        let expected = [1.0 / (10.0 + 2.0 * r), 1.0 / (10.0 - 2.0 * r)];
        assert_eq!(z.count(), 2);
        for (got, want) in z.locations().iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(match_pattern(&z, &SignPattern::pattern_a(2)));
    }

    #[test]
    fn constant_function() {
        let z = locate_zeros(|_| Ok(Sample::exact(1.0)), &half_grid()).unwrap();
        assert!(z.zeros.is_empty());
        assert_eq!(z.sign_profile.to_string(), "+");
    }

    #[test]
    fn negation_flips_profile_only() {
        let g = half_grid();
        let z = locate_zeros_with(|x| Ok(closed_form_half_sample(x, 3)), &g, Endpoints::vanishing()).unwrap();
        let n = locate_zeros_with(
            |x| {
                let s = closed_form_half_sample(x, 3);
                Ok(Sample::new(-s.value, s.err))
            },
            &g,
            Endpoints::vanishing(),
        )
        .unwrap();
        assert_eq!(z.locations(), n.locations());
        assert_eq!(z.sign_profile.negate(), n.sign_profile);
    }

    #[test]
    fn tangential_zero_is_ambiguous() {
        // (x-1)^2 touches zero without changing sign; make the band wide
        let g = Grid::log(0.5, 2.0, 50).unwrap().with_zero_tolerance(1e-2);
        let r = locate_zeros(|x| Ok(Sample::exact((x - 1.0) * (x - 1.0))), &g);
        assert!(matches!(r, Err(Error::AmbiguousZero { .. })), "{r:?}");
    }

    #[test]
    fn zero_run_with_sign_change_is_bracketed() {
        let g = Grid::log(0.5, 2.0, 50).unwrap().with_zero_tolerance(1e-2);
        let z = locate_zeros(|x| Ok(Sample::exact(x - 1.0)), &g).unwrap();
        assert_eq!(z.count(), 1);
        assert!((z.zeros[0].location - 1.0).abs() < 2e-2);
    }

    #[test]
    fn refinement_invariance() {
        let f = |x: f64| Ok(closed_form_half_sample(x, 2));
        let coarse = locate_zeros_with(f, &Grid::log(1e-2, 1e2, 200).unwrap(), Endpoints::vanishing()).unwrap();
        let fine = locate_zeros_with(f, &Grid::log(1e-2, 1e2, 4000).unwrap(), Endpoints::vanishing()).unwrap();
        assert_eq!(coarse.sign_profile, fine.sign_profile);
        for (a, b) in coarse.locations().iter().zip(fine.locations()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn interlacing() {
        assert!(strictly_interlace(&[1.0], &[0.5, 2.0]));
        assert!(!strictly_interlace(&[1.0], &[1.5, 2.0]));
        assert!(strictly_interlace(&[], &[3.0]));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![], 10, 0.0).is_err());
        assert!(Grid::new(vec![1.0, 1.0], 10, 0.0).is_err());
        assert!(Grid::new(vec![-1.0, 1.0], 10, 0.0).is_err());
    }
}
