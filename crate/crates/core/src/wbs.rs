//! Convolution chains `X + Exp(λ_1) + ... + Exp(λ_n)` over a finite
//! exponential mixture, built exactly in transform space.
//!
//! The transform `Π_k λ_k/(λ_k+s) · Σ_i w_i θ_i/(θ_i+s)` is split into
//! partial fractions with exact rational arithmetic (every double is a
//! dyadic rational, so inputs are taken at face value). Densities and their
//! derivatives are then `Σ_j Q_j(x) e^{-p_j x}`, evaluated in 512-bit
//! floating point because the terms cancel heavily near the origin.

use std::cmp::Ordering;
use std::f64::consts::PI;

use rug::{Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::Sample;
use crate::sign::bell::GridOptions;
use crate::sign::{locate_zeros_with, Endpoints, Grid, SignPattern, SignSymbol};

/// Working precision for chain evaluation.
pub const EVAL_PRECISION: u32 = 512;
/// Largest pole multiplicity handled.
pub const MAX_MULTIPLICITY: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMixture {
    /// `(weight, rate)` pairs.
    pub components: Vec<(f64, f64)>,
    /// Whether the weights as given already summed to one.
    pub normalized: bool,
}

impl ExpMixture {
    /// Validates the components and rescales the weights to sum to one.
    pub fn new(components: Vec<(f64, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        for &(w, r) in &components {
            if !(w > 0.0 && w.is_finite() && r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidInput(format!("weight {w} and rate {r} must be positive")));
            }
        }
        let mut rates: Vec<f64> = components.iter().map(|c| c.1).collect();
        rates.sort_by(f64::total_cmp);
        if rates.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("mixture rates must be distinct".into()));
        }
        let total: f64 = components.iter().map(|c| c.0).sum();
        Ok(Self {
            normalized: (total - 1.0).abs() <= 1e-12,
            components: components.into_iter().map(|(w, r)| (w / total, r)).collect(),
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![(1.0, rate)])
    }

    /// Rates `{1, 5/2, 7}` with weights `{1/2, 1/3, 1/6}`.
    pub fn default_base() -> Self {
        Self::new(vec![(0.5, 1.0), (1.0 / 3.0, 2.5), (1.0 / 6.0, 7.0)]).expect("valid constants")
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|&(w, r)| w * r * (-r * x).exp()).sum()
    }

    /// Weights as exact rationals summing to exactly one.
    fn exact_weights(&self) -> Vec<Rational> {
        let raw: Vec<Rational> = self.components.iter().map(|c| exact(c.0)).collect();
        let total = raw.iter().fold(Rational::new(), |acc, w| acc + w);
        raw.into_iter().map(|w| w / &total).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSpec {
    pub base: ExpMixture,
    /// Nondecreasing positive rates.
    pub exp_rates: Vec<f64>,
}

impl ChainSpec {
    pub fn new(base: ExpMixture, exp_rates: Vec<f64>) -> Result<Self> {
        if exp_rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput("exponential rates must be positive".into()));
        }
        if exp_rates.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("exponential rates must be nondecreasing".into()));
        }
        Ok(Self { base, exp_rates })
    }

    /// The default base with rates `k²π²`, `k = 1..=n`.
    pub fn default_chain(n: usize) -> Self {
        let rates = (1..=n).map(|k| (k * k) as f64 * PI * PI).collect();
        Self::new(ExpMixture::default_base(), rates).expect("valid constants")
    }

    pub fn n(&self) -> usize {
        self.exp_rates.len()
    }

    /// The chain with only the first `k` rates.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            base: self.base.clone(),
            exp_rates: self.exp_rates[..k.min(self.n())].to_vec(),
        }
    }
}

fn exact(v: f64) -> Rational {
    Rational::from_f64(v).expect("finite input")
}

/// The operations partial fractions need, so one routine serves both the
/// exact and the double path.
trait Field: Clone {
    fn zero() -> Self;
    fn from_int(k: i64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_int(k: i64) -> Self {
        k as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
}

impl Field for Rational {
    fn zero() -> Self {
        Rational::new()
    }
    fn from_int(k: i64) -> Self {
        Rational::from(k)
    }
    fn add(&self, o: &Self) -> Self {
        Rational::from(self + o)
    }
    fn sub(&self, o: &Self) -> Self {
        Rational::from(self - o)
    }
    fn mul(&self, o: &Self) -> Self {
        Rational::from(self * o)
    }
    fn div(&self, o: &Self) -> Self {
        Rational::from(self / o)
    }
}

/// Partial fractions of `Π_j (s + p_j)^{-m_j}` for distinct `p_j`: entry
/// `[j][r-1]` is the coefficient of `(s + p_j)^{-r}`. Around `s = -p_j`
/// the other factors expand as `(d + t)^{-m} = Σ_q (-1)^q C(m+q-1, q) t^q / d^{m+q}`.
fn partial_fractions<T: Field>(poles: &[(T, usize)]) -> Vec<Vec<T>> {
    poles
        .iter()
        .enumerate()
        .map(|(j, (pj, mj))| {
            let depth = *mj;
            let mut h = vec![T::zero(); depth];
            h[0] = T::from_int(1);
            for (l, (pl, ml)) in poles.iter().enumerate() {
                if l == j {
                    continue;
                }
                let d = pl.sub(pj);
                let mut dpow = T::from_int(1);
                for _ in 0..*ml {
                    dpow = dpow.mul(&d);
                }
                // coefficients of (d + t)^{-m}, built by the ratio of
                // consecutive terms: -(m + q) / ((q + 1) d)
                let mut factor = Vec::with_capacity(depth);
                let mut c = T::from_int(1).div(&dpow);
                for q in 0..depth {
                    factor.push(c.clone());
                    let ratio = T::from_int(-((*ml + q) as i64)).div(&T::from_int(q as i64 + 1).mul(&d));
                    c = c.mul(&ratio);
                }
                let mut next = vec![T::zero(); depth];
                for a in 0..depth {
                    for b in 0..depth - a {
                        next[a + b] = next[a + b].add(&h[a].mul(&factor[b]));
                    }
                }
                h = next;
            }
            (1..=depth).map(|r| h[depth - r].clone()).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pole {
    /// Negative real location `-p`.
    pub location: f64,
    pub multiplicity: usize,
}

/// Exact rational Laplace transform of a chain, in partial fractions.
#[derive(Debug, Clone, Serialize)]
pub struct RationalLT {
    pub poles: Vec<Pole>,
    /// `residues[j][r-1]` multiplies `(s - pole_j)^{-r}`; rounded images of
    /// the exact coefficients.
    pub residues: Vec<Vec<f64>>,
    pub numerator_degree: usize,
    pub denominator_degree: usize,
    #[serde(skip)]
    rates: Vec<Rational>,
    #[serde(skip)]
    exact_residues: Vec<Vec<Rational>>,
}

/// Distinct decay rates of the chain, ascending, with multiplicities.
fn pole_layout(spec: &ChainSpec) -> Result<Vec<(f64, usize)>> {
    let mut all: Vec<f64> = spec.exp_rates.clone();
    all.extend(spec.base.components.iter().map(|c| c.1));
    all.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for p in all {
        match out.last_mut() {
            Some((q, m)) if *q == p => *m += 1,
            _ => out.push((p, 1)),
        }
    }
    if let Some((p, m)) = out.iter().find(|(_, m)| *m > MAX_MULTIPLICITY) {
        return Err(Error::DegeneratePoles(format!(
            "rate {p} appears {m} times, above the supported multiplicity {MAX_MULTIPLICITY}"
        )));
    }
    Ok(out)
}

/// Residues of the whole transform as a sum over base components, each a
/// product of simple factors.
fn chain_residues<T: Field>(spec: &ChainSpec, layout: &[(f64, usize)], conv: impl Fn(f64) -> T, weights: &[T]) -> Vec<Vec<T>> {
    let lambdas: Vec<T> = spec.exp_rates.iter().map(|r| conv(*r)).collect();
    let lambda_prod = lambdas.iter().fold(T::from_int(1), |acc, l| acc.mul(l));
    let mut total: Vec<Vec<T>> = layout.iter().map(|(_, m)| vec![T::zero(); *m]).collect();
    for ((_, theta), w) in spec.base.components.iter().zip(weights) {
        let local: Vec<(usize, (T, usize))> = layout
            .iter()
            .enumerate()
            .filter_map(|(j, (p, _))| {
                let m = spec.exp_rates.iter().filter(|r| *r == p).count() + usize::from(p == theta);
                (m > 0).then(|| (j, (conv(*p), m)))
            })
            .collect();
        let poles: Vec<(T, usize)> = local.iter().map(|(_, pm)| pm.clone()).collect();
        let k = w.mul(&conv(*theta)).mul(&lambda_prod);
        for ((j, _), res) in local.iter().zip(partial_fractions(&poles)) {
            for (r, a) in res.iter().enumerate() {
                total[*j][r] = total[*j][r].add(&k.mul(a));
            }
        }
    }
    total
}

/// Builds the transform of `f_n` and its partial fractions exactly.
pub fn chain_laplace(spec: &ChainSpec) -> Result<RationalLT> {
    let layout = pole_layout(spec)?;
    let exact_residues = chain_residues(spec, &layout, exact, &spec.base.exact_weights());
    let thetas = spec.base.components.len();
    Ok(RationalLT {
        poles: layout
            .iter()
            .map(|(p, m)| Pole {
                location: -p,
                multiplicity: *m,
            })
            .collect(),
        residues: exact_residues.iter().map(|r| r.iter().map(|a| a.to_f64()).collect()).collect(),
        numerator_degree: thetas - 1,
        denominator_degree: thetas + spec.n(),
        rates: layout.iter().map(|(p, _)| exact(*p)).collect(),
        exact_residues,
    })
}

/// The same residues computed in double precision, for comparison with the
/// exact path; clustered poles make this ill-conditioned.
pub fn chain_residues_f64(spec: &ChainSpec) -> Result<Vec<Vec<f64>>> {
    let layout = pole_layout(spec)?;
    let weights: Vec<f64> = spec.base.components.iter().map(|c| c.0).collect();
    Ok(chain_residues(spec, &layout, |v| v, &weights))
}

impl RationalLT {
    /// `F(s) = Σ_j Σ_r A_{j,r} / (s + p_j)^r` for `s > -min p_j`.
    pub fn transform(&self, s: f64) -> f64 {
        let sf = Float::with_val(EVAL_PRECISION, s);
        let mut acc = Float::new(EVAL_PRECISION);
        for (p, res) in self.rates.iter().zip(&self.exact_residues) {
            let base = Float::with_val(EVAL_PRECISION, &sf + p);
            let mut pow = base.clone();
            for a in res {
                acc += Float::with_val(EVAL_PRECISION, a) / &pow;
                pow *= &base;
            }
        }
        acc.to_f64()
    }

    /// `F(0)` exactly; one for a probability density.
    pub fn value_at_zero(&self) -> Rational {
        let mut acc = Rational::new();
        for (p, res) in self.rates.iter().zip(&self.exact_residues) {
            let mut pow = p.clone();
            for a in res {
                acc += Rational::from(a / &pow);
                pow *= p;
            }
        }
        acc
    }

    /// Coefficients (power basis in `x`) of the polynomial multiplying
    /// `e^{-p_j x}` in the `order`-th derivative of the density.
    pub fn derivative_polynomials(&self, order: usize) -> Vec<Vec<Rational>> {
        self.rates
            .iter()
            .zip(&self.exact_residues)
            .map(|(p, res)| {
                // inverse of A/(s+p)^r is A x^{r-1}/(r-1)! e^{-px}
                let mut fact = Rational::from(1);
                let mut q: Vec<Rational> = res
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        if k > 0 {
                            fact *= Rational::from(k as i64);
                        }
                        Rational::from(a / &fact)
                    })
                    .collect();
                for _ in 0..order {
                    // (Q e^{-px})' = (Q' - p Q) e^{-px}
                    let mut next: Vec<Rational> = q.iter().map(|c| -Rational::from(c * p)).collect();
                    for k in 1..q.len() {
                        next[k - 1] += &q[k] * Rational::from(k as i64);
                    }
                    q = next;
                }
                q
            })
            .collect()
    }

    /// `f^{(order)}(0+)` exactly.
    pub fn boundary_value(&self, order: usize) -> Rational {
        self.derivative_polynomials(order)
            .iter()
            .fold(Rational::new(), |acc, q| acc + &q[0])
    }

    pub fn evaluator(&self, order: usize) -> OrderEvaluator {
        let prec = EVAL_PRECISION;
        let polys = self.derivative_polynomials(order);
        OrderEvaluator {
            rates: self.rates.iter().map(|p| Float::with_val(prec, p)).collect(),
            polys: polys
                .iter()
                .map(|q| q.iter().map(|c| Float::with_val(prec, c)).collect())
                .collect(),
            exact_polys: polys,
        }
    }
}

/// A fixed derivative order of a chain density, ready for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub struct OrderEvaluator {
    rates: Vec<Float>,
    polys: Vec<Vec<Float>>,
    exact_polys: Vec<Vec<Rational>>,
}

impl OrderEvaluator {
    pub fn eval(&self, x: f64) -> Sample {
        let prec = EVAL_PRECISION;
        let xf = Float::with_val(prec, x);
        let mut acc = Float::new(prec);
        let mut magnitude = Float::new(prec);
        for (p, q) in self.rates.iter().zip(&self.polys) {
            let damp = (-Float::with_val(prec, p * &xf)).exp();
            let mut xk = damp;
            for c in q {
                let term = Float::with_val(prec, c * &xk);
                magnitude += Float::with_val(prec, term.abs_ref());
                acc += term;
                xk *= &xf;
            }
        }
        let value = acc.to_f64();
        let bound = (magnitude >> (prec - 16)).to_f64();
        Sample::new(value, bound + f64::EPSILON * value.abs())
    }

    /// Monomials `(p, k, c)` standing for `c x^k e^{-px}`.
    fn monomials(&self) -> impl Iterator<Item = (f64, usize, f64)> + '_ {
        self.exact_polys.iter().zip(&self.rates).flat_map(|(q, p)| {
            let p = p.to_f64();
            q.iter().enumerate().filter(|(_, c)| c.cmp0() != Ordering::Equal).map(move |(k, c)| (p, k, c.to_f64()))
        })
    }

    /// Whether the slowest-decaying monomial outweighs twice all the others
    /// at `x`, compared in logarithms.
    fn slowest_dominates(&self, x: f64) -> bool {
        let ln_mag = |(p, k, c): (f64, usize, f64)| c.abs().ln() + k as f64 * x.ln() - p * x;
        let mut monos: Vec<(f64, usize, f64)> = self.monomials().collect();
        // slowest: smallest rate, then highest power
        monos.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let Some((&lead, rest)) = monos.split_first() else {
            return true;
        };
        let l = ln_mag(lead);
        let others: f64 = rest.iter().map(|m| (ln_mag(*m) - l).exp()).sum();
        2.0 * others < 1.0
    }
}

/// `f^{(order)}(x)` for the chain with transform `lt`.
pub fn chain_density(lt: &RationalLT, x: f64, order: usize) -> Sample {
    lt.evaluator(order).eval(x)
}

/// Sign of `f^{(i)}(0+)` for `i = 0..=max_order`, exact. Where the value
/// at 0 vanishes this is [`SignSymbol::Zero`], matching the sign pattern
/// convention for the limit at the origin.
pub fn boundary_signs(spec: &ChainSpec, max_order: usize) -> Result<Vec<SignSymbol>> {
    let lt = chain_laplace(spec)?;
    Ok((0..=max_order)
        .map(|i| match lt.boundary_value(i).cmp0() {
            Ordering::Less => SignSymbol::Minus,
            Ordering::Equal => SignSymbol::Zero,
            Ordering::Greater => SignSymbol::Plus,
        })
        .collect())
}

/// Expected sign profile of `f_n^{(i)}`: `a_i` below order `n`,
/// `(-1)^{n+i} b_n` from there on.
pub fn expected_profile(n: usize, i: usize) -> SignPattern {
    if i < n {
        SignPattern::pattern_a(i)
    } else {
        SignPattern::pattern_b(n).times_sign(n + i)
    }
}

/// Whether a list of profiles `f^{(0)}, f^{(1)}, ...` fits weak bell shape
/// of order `m` (`m = -1` meaning every derivative alternates as `b_0`):
/// `a_i` for `i ≤ m`, `(-1)^{m+1+i} b_{m+1}` beyond.
pub fn fits_wbs(profiles: &[SignPattern], m: i64) -> bool {
    profiles.iter().enumerate().all(|(i, p)| {
        let expected = if (i as i64) <= m {
            SignPattern::pattern_a(i)
        } else {
            let k = (m + 1) as usize;
            SignPattern::pattern_b(k).times_sign(k + i)
        };
        *p == expected
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub order: usize,
    pub observed: SignPattern,
    pub expected: SignPattern,
    pub zero_count: usize,
    pub zeros: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WbsReport {
    pub n: usize,
    pub exp_rates: Vec<f64>,
    pub boundary: Vec<SignSymbol>,
    pub profiles: Vec<ProfileRow>,
    /// Orders `m ∈ [-1, i_max)` whose weak bell-shape profile set the
    /// observed profiles satisfy; the chain structure predicts exactly `n - 1`.
    pub wbs_orders: Vec<i64>,
    pub pass: bool,
}

/// Sampling range for a chain derivative: from `1e-4 / Σ p_j m_j` to the
/// point where the slowest monomial has dominated at four consecutive
/// steps of 1.5.
pub fn chain_range(lt: &RationalLT, eval: &OrderEvaluator) -> (f64, f64) {
    let total: f64 = lt.poles.iter().map(|p| -p.location * p.multiplicity as f64).sum();
    let lo = 1e-4 / total;
    let mut x = 1.0 / total;
    let mut streak = 0;
    while streak < 4 {
        if eval.slowest_dominates(x) {
            streak += 1;
        } else {
            streak = 0;
        }
        x *= 1.5;
    }
    (lo, x)
}

/// Observed sign profiles of `f_n^{(i)}`, `i = 0..=i_max`, against the
/// expected profiles.
pub fn verify_wbs(spec: &ChainSpec, i_max: usize, opts: &GridOptions) -> Result<WbsReport> {
    let n = spec.n();
    if i_max < n {
        return Err(Error::InvalidInput(format!("i_max = {i_max} must be at least n = {n}")));
    }
    let lt = chain_laplace(spec)?;
    let boundary = boundary_signs(spec, i_max)?;
    let mut profiles = Vec::with_capacity(i_max + 1);
    for (i, &left) in boundary.iter().enumerate() {
        let ev = lt.evaluator(i);
        let grid: Grid = match opts.range {
            Some((lo, hi)) => opts.build(lo, hi)?,
            None => {
                let (lo, hi) = chain_range(&lt, &ev);
                opts.build(lo, hi)?
            }
        };
        let ends = Endpoints {
            left: Some(left),
            right: Some(SignSymbol::Zero),
        };
        let z = locate_zeros_with(|x| Ok(ev.eval(x)), &grid, ends).map_err(|e| e.at_order(i))?;
        let expected = expected_profile(n, i);
        profiles.push(ProfileRow {
            order: i,
            pass: z.sign_profile == expected,
            observed: z.sign_profile.clone(),
            expected,
            zero_count: z.count(),
            zeros: z.locations(),
        });
    }
    let observed: Vec<SignPattern> = profiles.iter().map(|p| p.observed.clone()).collect();
    let wbs_orders: Vec<i64> = (-1..i_max as i64).filter(|m| fits_wbs(&observed, *m)).collect();
    let pass = profiles.iter().all(|p| p.pass) && wbs_orders == vec![n as i64 - 1];
    Ok(WbsReport {
        n,
        exp_rates: spec.exp_rates.clone(),
        boundary,
        profiles,
        wbs_orders,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::quadrature::{integrate, QuadratureConfig};

    fn single_two() -> ChainSpec {
        ChainSpec::new(ExpMixture::exponential(1.0).unwrap(), vec![2.0]).unwrap()
    }

    #[test]
    fn hand_partial_fractions() {
        let lt = chain_laplace(&single_two()).unwrap();
        assert_eq!(lt.residues, vec![vec![2.0], vec![-2.0]]);
        assert_eq!(lt.value_at_zero(), 1);
        for x in [0.1f64, 1.0, 3.0] {
            let want = 2.0 * ((-x).exp() - (-2.0 * x).exp());
            assert!((chain_density(&lt, x, 0).value - want).abs() < 1e-15);
        }
        let crit = chain_density(&lt, 2f64.ln(), 1);
        assert!(crit.value.abs() < 1e-15);
    }

    #[test]
    fn empty_chain_is_base() {
        let spec = ChainSpec::new(ExpMixture::exponential(3.0).unwrap(), vec![]).unwrap();
        let lt = chain_laplace(&spec).unwrap();
        assert_eq!(lt.residues, vec![vec![3.0]]);
        assert!((chain_density(&lt, 0.5, 0).value - 3.0 * (-1.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn normalization_exact() {
        for n in 0..=5 {
            assert_eq!(chain_laplace(&ChainSpec::default_chain(n)).unwrap().value_at_zero(), 1);
        }
    }

    #[test]
    fn repeated_rates() {
        // Exp(1) + Exp(1) is Gamma(2, 1): density x e^{-x}
        let spec = ChainSpec::new(ExpMixture::exponential(1.0).unwrap(), vec![1.0]).unwrap();
        let lt = chain_laplace(&spec).unwrap();
        assert_eq!(lt.poles[0].multiplicity, 2);
        for x in [0.2, 2.0] {
            assert!((chain_density(&lt, x, 0).value - x * (-x).exp()).abs() < 1e-15);
            assert!((chain_density(&lt, x, 1).value - (1.0 - x) * (-x).exp()).abs() < 1e-15);
        }
        // Gamma(4, 2) via three equal rates and a matching base
        let spec = ChainSpec::new(ExpMixture::exponential(2.0).unwrap(), vec![2.0, 2.0, 2.0]).unwrap();
        let lt = chain_laplace(&spec).unwrap();
        let x: f64 = 1.3;
        let want = 16.0 * x.powi(3) * (-2.0 * x).exp() / 6.0;
        assert!((chain_density(&lt, x, 0).value - want).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ExpMixture::new(vec![(0.5, 1.0), (0.5, 1.0)]).is_err());
        assert!(ExpMixture::new(vec![(-0.5, 1.0)]).is_err());
        assert!(ChainSpec::new(ExpMixture::default_base(), vec![3.0, 2.0]).is_err());
        let many = ChainSpec::new(ExpMixture::exponential(1.0).unwrap(), vec![1.0; MAX_MULTIPLICITY]).unwrap();
        assert!(matches!(chain_laplace(&many), Err(Error::DegeneratePoles(_))));
    }

    #[test]
    fn double_path_agrees_on_separated_poles() {
        let spec = ChainSpec::default_chain(3);
        let exact = chain_laplace(&spec).unwrap().residues;
        let approx = chain_residues_f64(&spec).unwrap();
        for (e, a) in exact.iter().flatten().zip(approx.iter().flatten()) {
            assert!((e - a).abs() < 1e-10 * e.abs(), "{e} vs {a}");
        }
    }

    #[test]
    fn boundary_signs_single_rate() {
        let s = boundary_signs(&single_two(), 3).unwrap();
        assert_eq!(s, vec![SignSymbol::Zero, SignSymbol::Plus, SignSymbol::Minus, SignSymbol::Plus]);
    }

    #[test]
    fn boundary_signs_alternate_as_expected() {
        for n in 0..=4 {
            let s = boundary_signs(&ChainSpec::default_chain(n), n + 3).unwrap();
            for (i, sym) in s.iter().enumerate() {
                let want = if i < n { SignSymbol::Zero } else { SignSymbol::alternating(n + i) };
                assert_eq!(*sym, want, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn ode_residual() {
        // f_n' + λ_n f_n = λ_n f_{n-1}
        let spec = ChainSpec::default_chain(4);
        let lam = spec.exp_rates[3];
        let full = chain_laplace(&spec).unwrap();
        let prev = chain_laplace(&spec.prefix(3)).unwrap();
        for x in [1e-3, 0.02, 0.3, 1.7, 9.0] {
            let d = chain_density(&full, x, 1).value;
            let f = chain_density(&full, x, 0).value;
            let g = chain_density(&prev, x, 0).value;
            let scale = d.abs() + lam * (f.abs() + g.abs());
            assert!((d + lam * f - lam * g).abs() < 1e-14 * scale);
        }
    }

    #[test]
    fn laplace_consistency() {
        let spec = ChainSpec::default_chain(2);
        let lt = chain_laplace(&spec).unwrap();
        let ev = lt.evaluator(0);
        let q = QuadratureConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        };
        for s in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let num = integrate(|x| Ok((-s * x).exp() * ev.eval(x).value), 0.0, 60.0, &q).unwrap().value;
            assert!((num - lt.transform(s)).abs() < 1e-10, "s={s}");
        }
    }

    #[test]
    fn single_rate_profiles() {
        let r = verify_wbs(&single_two(), 3, &GridOptions::default()).unwrap();
        let shown: Vec<String> = r.profiles.iter().map(|p| p.observed.to_string()).collect();
        assert_eq!(shown, vec!["0+0", "+0-0", "-0+0", "+0-0"]);
        assert!(r.pass, "{r:?}");
        assert!((r.profiles[1].zeros[0] - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fits_wbs_examples() {
        let p = |s: &str| SignPattern::parse(s).unwrap();
        let obs = vec![p("0+0"), p("+0-0"), p("-0+0")];
        assert!(fits_wbs(&obs, 0));
        assert!(!fits_wbs(&obs, 1));
        assert!(!fits_wbs(&obs, -1));
        assert!(fits_wbs(&[p("+0"), p("-0"), p("+0")], -1));
    }
}
