//! Adaptive Gauss–Kronrod (21-point) integration and a composite
//! Gauss–Legendre rule with panel doubling.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

// Published 21-point Kronrod nodes and weights, kept at full printed precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525478766,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the nodes XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

fn gk21<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    if !value.is_finite() {
        return Err(Error::QuadratureFailure {
            a,
            b,
            reason: "non-finite integrand".into(),
        });
    }
    Ok((value, err))
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_pieces(f, &[a, b], cfg)
}

/// Globally adaptive integration over `[p_0, p_last]` starting from the
/// pieces `[p_0, p_1], [p_1, p_2], ...`. The tolerance applies to the
/// total, so pieces carrying negligible mass are not refined for nothing.
pub fn integrate_pieces<F>(mut f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    assert!(!breaks.is_empty());
    let (a, b) = (breaks[0], breaks[breaks.len() - 1]);
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let (value, err) = gk21(&mut f, w[0], w[1])?;
        evaluations += 21;
        heap.push(Interval {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    let mut total: f64 = heap.iter().map(|i| i.value).sum();
    let mut total_err: f64 = heap.iter().map(|i| i.err).sum();
    let mut splits = 0;
    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if splits >= cfg.max_subdivisions {
            return Err(Error::QuadratureFailure {
                a,
                b,
                reason: format!(
                    "error estimate {total_err:.3e} above tolerance after {splits} subdivisions"
                ),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at double resolution; accept what we have
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b)?;
        evaluations += 42;
        splits += 1;
        total += v1 + v2 - worst.value;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        // re-sum to avoid drift from the incremental updates
        total_err = heap.iter().map(|i| i.err).sum();
    }
    let value = heap.iter().map(|i| i.value).sum::<f64>();
    Ok(QuadResult {
        value,
        error: total_err,
        evaluations,
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed-node Gauss–Legendre on `panels` equal panels of `[a, b]`.
pub fn composite_gauss<F>(f: &mut F, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>), panels: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * width;
        let s: f64 = rule
            .0
            .iter()
            .zip(&rule.1)
            .map(|(x, w)| w * f(c + half * x))
            .sum();
        total += s * half;
    }
    total
}

/// Composite Gauss–Legendre with the panel count doubled until two
/// successive estimates agree to `tol` (absolute or relative).
pub fn gauss_doubling<F>(
    mut f: F,
    a: f64,
    b: f64,
    rule: &(Vec<f64>, Vec<f64>),
    tol: f64,
    max_doublings: usize,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    let mut panels = 1;
    let mut prev = composite_gauss(&mut f, a, b, rule, panels);
    let mut evaluations = rule.0.len();
    for _ in 0..max_doublings {
        panels *= 2;
        let next = composite_gauss(&mut f, a, b, rule, panels);
        evaluations += panels * rule.0.len();
        let diff = (next - prev).abs();
        if diff <= tol.max(tol * next.abs()) {
            return Ok(QuadResult {
                value: next,
                error: diff,
                evaluations,
            });
        }
        prev = next;
    }
    Err(Error::QuadratureFailure {
        a,
        b,
        reason: format!("no agreement after {max_doublings} panel doublings"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let r = integrate(|x| Ok(x * x * x - 2.0 * x), 0.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
    }

    #[test]
    fn gk_peaked_integrand() {
        // ∫_0^1 1/sqrt(x) dx = 2 has an endpoint singularity
        let cfg = QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_subdivisions: 500,
        };
        let r = integrate(|x| Ok(1.0 / x.sqrt()), 0.0, 1.0, &cfg).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn gk_reports_failure() {
        let cfg = QuadratureConfig {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_subdivisions: 3,
        };
        let r = integrate(|x| Ok((1.0 / x).sin()), 1e-3, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }

    #[test]
    fn legendre_rule_integrates_degree_2n_minus_1() {
        let rule = gauss_legendre(7);
        let s: f64 = rule.1.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m12: f64 = rule.0.iter().zip(&rule.1).map(|(x, w)| w * x.powi(12)).sum();
        assert!((m12 - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn doubling_converges() {
        let rule = gauss_legendre(10);
        let r = gauss_doubling(|x: f64| x.exp(), 0.0, 3.0, &rule, 1e-13, 10).unwrap();
        assert!((r.value - (3f64.exp() - 1.0)).abs() < 1e-11);
    }
}
