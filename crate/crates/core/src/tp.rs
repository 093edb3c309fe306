//! Total positivity of convolution kernels `K(x, y) = f(x - y)`: minor
//! scans, a non-TP₂ witness for the stable density, and the
//! variation-diminishing bound.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{logspace, NeumaierSum};
use crate::sign::count_sign_changes_open;
use crate::stable::inflection::log_concavity_sample;
use crate::stable::sampling::rng_from_seed;
use crate::stable::{Alpha, SeriesConfig, StableDensity};
use crate::wbs::{chain_laplace, ChainSpec, ExpMixture, OrderEvaluator};
use crate::yamazato::kappa;

/// Largest minor order evaluated by cofactor expansion.
pub const MAX_MINOR_ORDER: usize = 6;
/// A minor is negative only below `-MINOR_TOLERANCE` times the product of
/// its rows' largest entries.
pub const MINOR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelMatrix {
    pub kernel_id: String,
    pub x_points: Vec<f64>,
    pub y_points: Vec<f64>,
    pub entries: Vec<Vec<f64>>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Fills `f(x_i - y_j)`, with `f` taken as 0 on `(-∞, 0]`.
pub fn build_kernel<F>(f: F, xs: &[f64], ys: &[f64], kernel_id: &str) -> Result<KernelMatrix>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if xs.is_empty() || ys.is_empty() || !strictly_increasing(xs) || !strictly_increasing(ys) {
        return Err(Error::InvalidInput("kernel grids must be nonempty and strictly increasing".into()));
    }
    let entries = xs
        .par_iter()
        .map(|x| {
            ys.iter()
                .map(|y| {
                    let t = x - y;
                    if t > 0.0 {
                        f(t)
                    } else {
                        Ok(0.0)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelMatrix {
        kernel_id: kernel_id.to_string(),
        x_points: xs.to_vec(),
        y_points: ys.to_vec(),
        entries,
    })
}

/// `f(x_i - y_j)` on the common uniform grid `x_i = y_i = i·step`,
/// `i < points`, evaluating `f` once per lag.
pub fn build_uniform_kernel<F>(f: F, step: f64, points: usize, kernel_id: &str) -> Result<KernelMatrix>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if !(step > 0.0) || points == 0 {
        return Err(Error::InvalidInput("uniform kernel needs a positive step and points".into()));
    }
    let lags: Vec<f64> = (1..points).into_par_iter().map(|k| f(k as f64 * step)).collect::<Result<_>>()?;
    let xs: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
    let entries = (0..points)
        .map(|i| (0..points).map(|j| if i > j { lags[i - j - 1] } else { 0.0 }).collect())
        .collect();
    Ok(KernelMatrix {
        kernel_id: kernel_id.to_string(),
        x_points: xs.clone(),
        y_points: xs,
        entries,
    })
}

impl KernelMatrix {
    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.y_points.len()
    }

    /// `K v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries
            .iter()
            .map(|row| {
                let mut acc = NeumaierSum::new();
                for (k, x) in row.iter().zip(v) {
                    acc.add(k * x);
                }
                acc.value()
            })
            .collect()
    }
}

/// Determinant by full permutation expansion with compensated summation.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    assert!(n <= MAX_MINOR_ORDER && m.iter().all(|r| r.len() == n));
    if n == 0 {
        return 1.0;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut acc = NeumaierSum::new();
    // Heap's algorithm; each swap flips the sign
    let mut c = vec![0usize; n];
    let mut sign = 1.0;
    let term = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| m[i][j]).product::<f64>();
    acc.add(term(&perm));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            acc.add(sign * term(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    acc.value()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub value: f64,
    /// `value` divided by the product of the rows' largest entries.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinorReport {
    pub kernel_id: String,
    pub order_checked: usize,
    pub minors_evaluated: usize,
    pub min_minor: f64,
    pub witness: Option<Witness>,
    pub all_nonnegative: bool,
}

fn minor(km: &KernelMatrix, rows: &[usize], cols: &[usize]) -> Witness {
    let sub: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| cols.iter().map(|&j| km.entries[i][j]).collect())
        .collect();
    let scale: f64 = sub.iter().map(|r| r.iter().fold(0.0f64, |a, b| a.max(*b))).product();
    let value = determinant(&sub);
    Witness {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        value,
        normalized: if scale > 0.0 { value / scale } else { 0.0 },
    }
}

/// Scans minors of orders 2 through `order` (entries, the order-1 minors,
/// are nonnegative by construction; `order = 1` checks them alone): every
/// minor on contiguous rows and columns, then `budget` random index sets
/// drawn from `seed`. The witness is the most negative minor relative to
/// its scale, if below tolerance.
pub fn scan_minors(km: &KernelMatrix, order: usize, budget: usize, seed: u64) -> Result<MinorReport> {
    let (nr, nc) = (km.rows(), km.cols());
    if order == 0 || order > MAX_MINOR_ORDER || order > nr.min(nc) {
        return Err(Error::InvalidInput(format!(
            "minor order {order} must be in 1..={} and fit a {nr}x{nc} matrix",
            MAX_MINOR_ORDER.min(nr.min(nc))
        )));
    }
    let orders: Vec<usize> = if order == 1 { vec![1] } else { (2..=order).collect() };
    let mut index_sets: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for &k in &orders {
        for i in 0..=nr - k {
            for j in 0..=nc - k {
                index_sets.push(((i..i + k).collect(), (j..j + k).collect()));
            }
        }
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..budget {
        let k = orders[rng.random_range(0..orders.len())];
        let mut r = sample_indices(&mut rng, nr, k).into_vec();
        let mut c = sample_indices(&mut rng, nc, k).into_vec();
        r.sort_unstable();
        c.sort_unstable();
        index_sets.push((r, c));
    }
    let minors: Vec<Witness> = index_sets.par_iter().map(|(r, c)| minor(km, r, c)).collect();
    let min_minor = minors.iter().map(|w| w.value).fold(f64::INFINITY, f64::min);
    let worst = minors
        .into_iter()
        .min_by(|a, b| a.normalized.total_cmp(&b.normalized))
        .filter(|w| w.normalized < -MINOR_TOLERANCE);
    Ok(MinorReport {
        kernel_id: km.kernel_id.clone(),
        order_checked: order,
        minors_evaluated: index_sets.len(),
        min_minor,
        all_nonnegative: worst.is_none(),
        witness: worst,
    })
}

/// Sign changes of `v` and of `K v`. Output entries within rounding of
/// zero count as zero, so they are dropped like exact zeros.
pub fn vd_bound_check(km: &KernelMatrix, input: &[f64]) -> Result<(usize, usize)> {
    if input.len() != km.cols() {
        return Err(Error::InvalidInput(format!(
            "input has {} entries, kernel has {} columns",
            input.len(),
            km.cols()
        )));
    }
    let out: Vec<f64> = km
        .apply(input)
        .into_iter()
        .zip(&km.entries)
        .map(|(o, row)| {
            let mag: f64 = row.iter().zip(input).map(|(k, v)| (k * v).abs()).sum();
            if o.abs() <= 4.0 * row.len() as f64 * f64::EPSILON * mag {
                0.0
            } else {
                o
            }
        })
        .collect();
    Ok((count_sign_changes_open(input), count_sign_changes_open(&out)))
}

/// Density of `Σ_{k=1}^n Exp(κ_k)` with the stable factorization rates.
pub fn expsum_density(a: Alpha, n: usize) -> Result<OrderEvaluator> {
    if n == 0 {
        return Err(Error::InvalidInput("at least one rate is required".into()));
    }
    let rates: Vec<f64> = (1..=n).map(|k| kappa(a, k)).collect();
    let spec = ChainSpec::new(ExpMixture::exponential(rates[0])?, rates[1..].to_vec())?;
    Ok(chain_laplace(&spec)?.evaluator(0))
}

/// Kernel of the exponential-sum density on a uniform grid of `points`
/// values in `[0, span]` for both variables (`points ≥ 2`).
pub fn expsum_kernel(a: Alpha, n: usize, span: f64, points: usize) -> Result<KernelMatrix> {
    let g = expsum_density(a, n)?;
    let step = span / (points - 1) as f64;
    build_uniform_kernel(|t| Ok(g.eval(t).value), step, points, &format!("exponential sum, alpha = {}, n = {n}", a.value()))
}

/// Kernel of `f_α` on a uniform grid in `[0, span]`.
pub fn stable_kernel(a: Alpha, span: f64, points: usize, cfg: &SeriesConfig) -> Result<KernelMatrix> {
    let d = StableDensity::new(a, *cfg)?;
    let step = span / (points - 1) as f64;
    build_uniform_kernel(|t| Ok(d.density(t)?.value), step, points, &format!("stable density, alpha = {}", a.value()))
}

/// Left end of the tail region where `log f_α` is convex: scanning down a
/// logarithmic grid from `1e4` (where the power tail makes it convex), the
/// last point before concavity shows up. Not refined.
pub fn log_convexity_onset(a: Alpha, cfg: &SeriesConfig) -> Result<f64> {
    let d = StableDensity::new(a, *cfg)?;
    let xs = logspace(1e-3, 1e4, 281);
    let mut last_convex = None;
    for &x in xs.iter().rev() {
        let s = log_concavity_sample(&d, x)?;
        if s.value > s.err {
            last_convex = Some(x);
        } else if last_convex.is_some() {
            break;
        }
    }
    if let Some(x) = last_convex {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        x: 1e4,
        order: 2,
        reason: "log f stays concave on the scanned range".into(),
    })
}

/// Looks for a negative 2x2 minor of `f_α(x - y)`. With rows `t, t + h`
/// and columns `0, h` the minor is `f(t)² - f(t-h) f(t+h)`, negative
/// exactly where `log f` is convex on the scale `h`; candidates start at
/// the onset of log-convexity and move right, then fall back to random
/// placements drawn from `seed`.
pub fn non_tp2_witness(a: Alpha, cfg: &SeriesConfig, seed: u64) -> Result<(KernelMatrix, MinorReport)> {
    let d = StableDensity::new(a, *cfg)?;
    let f = |t: f64| -> Result<f64> { Ok(d.density(t)?.value) };
    let onset = log_convexity_onset(a, cfg).unwrap_or(1.0);
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for k in 0..24 {
        let t = onset * 1.25f64.powi(k);
        candidates.push((t, 0.25 * t));
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..200 {
        let t = onset * 10f64.powf(rng.random_range(-1.0..2.0));
        candidates.push((t, t * rng.random_range(0.01..0.9)));
    }
    for (t, h) in candidates {
        let km = build_kernel(f, &[t, t + h], &[0.0, h], &format!("stable density, alpha = {}", a.value()))?;
        let rep = scan_minors(&km, 2, 0, seed)?;
        if rep.witness.is_some() {
            return Ok((km, rep));
        }
    }
    Err(Error::NonConvergence {
        x: onset,
        order: 2,
        reason: "no negative 2x2 minor found".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(entries: Vec<Vec<f64>>) -> KernelMatrix {
        let n = entries.len();
        let idx: Vec<f64> = (0..n).map(|i| i as f64).collect();
        KernelMatrix {
            kernel_id: "test".into(),
            x_points: idx.clone(),
            y_points: idx,
            entries,
        }
    }

    #[test]
    fn support_convention() {
        let km = build_kernel(|t| Ok((-t).exp()), &[1.0, 2.0], &[1.0, 2.0], "exp").unwrap();
        assert_eq!(km.entries, vec![vec![0.0, 0.0], vec![(-1.0f64).exp(), 0.0]]);
        assert!(build_kernel(Ok, &[2.0, 1.0], &[0.0], "bad").is_err());
    }

    #[test]
    fn determinants() {
        assert_eq!(determinant(&[vec![2.0, 1.0], vec![1.0, 2.0]]), 3.0);
        let m = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        assert_eq!(determinant(&m), 4.0);
        // Hilbert 4x4: 1/6048000
        let h: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| 1.0 / (i + j + 1) as f64).collect()).collect();
        assert!((determinant(&h) - 1.0 / 6_048_000.0).abs() < 1e-18);
        let id: Vec<Vec<f64>> = (0..6).map(|i| (0..6).map(|j| if i == j { 3.0 } else { 0.0 }).collect()).collect();
        assert_eq!(determinant(&id), 729.0);
    }

    #[test]
    fn hand_minor_scan() {
        let r = scan_minors(&plain(vec![vec![2.0, 1.0], vec![1.0, 2.0]]), 2, 0, 1).unwrap();
        assert_eq!(r.min_minor, 3.0);
        assert!(r.all_nonnegative && r.witness.is_none());
        let r = scan_minors(&plain(vec![vec![1.0, 2.0], vec![2.0, 1.0]]), 2, 0, 1).unwrap();
        assert!(!r.all_nonnegative);
        assert_eq!(r.witness.unwrap().value, -3.0);
        assert!(scan_minors(&plain(vec![vec![1.0]]), 2, 0, 1).is_err());
    }

    #[test]
    fn exponential_kernel_is_tp() {
        let xs = crate::numeric::linspace(0.0, 3.0, 12);
        let km = build_kernel(|t| Ok((-1.7 * t).exp()), &xs, &xs, "exp").unwrap();
        let r = scan_minors(&km, 4, 3000, 7).unwrap();
        assert!(r.all_nonnegative, "{:?}", r.witness);
    }

    #[test]
    fn uniform_kernel_matches_general() {
        let f = |t: f64| Ok((-t).exp() * t);
        let u = build_uniform_kernel(f, 0.25, 6, "u").unwrap();
        let g = build_kernel(f, &u.x_points, &u.y_points, "g").unwrap();
        for (a, b) in u.entries.iter().flatten().zip(g.entries.iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_kernel_preserves_changes() {
        let km = plain(vec![vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 0.5]]);
        assert_eq!(vd_bound_check(&km, &[1.0, -1.0, 1.0]).unwrap(), (2, 2));
        assert!(vd_bound_check(&km, &[1.0]).is_err());
    }

    #[test]
    fn half_onset_near_one_third() {
        let x = log_convexity_onset(Alpha::half(), &SeriesConfig::default()).unwrap();
        assert!(x > 1.0 / 3.0 && x < 1.0 / 3.0 * 1.07, "{x}");
    }

    #[test]
    fn stable_witness() {
        let (km, rep) = non_tp2_witness(Alpha::new(0.7).unwrap(), &SeriesConfig::default(), 3).unwrap();
        let w = rep.witness.unwrap();
        assert!(w.normalized < -MINOR_TOLERANCE);
        assert!(km.x_points[0] > log_convexity_onset(Alpha::new(0.7).unwrap(), &SeriesConfig::default()).unwrap() * 0.99);
    }
}
