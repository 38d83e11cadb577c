//! Globally adaptive Gauss–Legendre quadrature.
//!
//! Each interval carries the 10-point rule on its two halves; the difference
//! between the whole-interval rule and the sum of the halves is the error
//! estimate. The interval with the largest estimate is bisected until the
//! summed estimate meets `max(abs_tol, rel_tol * |I|)`.
//!
//! Unbounded intervals are mapped onto `(0, 1]` with `u = c + L(1/s² - 1)`
//! (mirrored for a left-unbounded interval), where `c` lies at distance `L`
//! from the finite end, twice that of the farthest breakpoint. The interval
//! budget counts refinements beyond the initial partition.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

fn legendre_rule() -> &'static ([f64; ORDER], [f64; ORDER]) {
    static RULE: OnceLock<([f64; ORDER], [f64; ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = ORDER;
        let mut nodes = [0.0; ORDER];
        let mut weights = [0.0; ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn rule<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Complex64 {
    rule_abs(f, a, b).0
}

/// The rule together with the same rule applied to `|f|`.
fn rule_abs<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let (nodes, weights) = legendre_rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let v = f(mid + half * x);
        acc += v * *w;
        abs += v.norm() * *w;
    }
    (acc * half, abs * half.abs())
}

struct Segment {
    a: f64,
    b: f64,
    left: Complex64,
    right: Complex64,
    err: f64,
}

impl Segment {
    fn new<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, whole: Complex64) -> Self {
        let m = 0.5 * (a + b);
        let (left, la) = rule_abs(f, a, m);
        let (right, ra) = rule_abs(f, m, b);
        let mut err = (whole - left - right).norm();
        // below the roundoff floor further bisection cannot help
        if err <= 50.0 * f64::EPSILON * (la + ra) {
            err = 0.0;
        }
        Segment { a, b, left, right, err }
    }

    fn value(&self) -> Complex64 {
        self.left + self.right
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates a complex-valued `f` over the finite interval `[a, b]`, using
/// `breaks` (clipped to the interval) as the initial partition.
pub fn integrate_finite<F>(f: F, a: f64, b: f64, breaks: &[f64], cfg: &QuadConfig) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if !(a < b) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut cuts: Vec<f64> = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|x| x.is_finite() && *x > a && *x < b));
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let budget = cfg.max_intervals + cuts.len();
    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        let whole = rule(&f, w[0], w[1]);
        heap.push(Segment::new(&f, w[0], w[1], whole));
    }

    loop {
        let total: Complex64 = heap.iter().map(Segment::value).sum();
        let err: f64 = heap.iter().map(|s| s.err).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            let at = heap
                .iter()
                .find(|s| !s.value().re.is_finite() || !s.value().im.is_finite())
                .map(|s| 0.5 * (s.a + s.b))
                .unwrap_or(a);
            return Err(Error::NonFiniteIntegrand { at });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.norm());
        if err <= tol {
            return Ok(total);
        }
        if heap.len() >= budget {
            return Err(Error::QuadratureFailure {
                tolerance: tol,
                intervals: heap.len(),
                estimate: err,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // interval exhausted at double precision: freeze it
            heap.push(Segment { err: 0.0, ..worst });
            continue;
        }
        heap.push(Segment::new(&f, worst.a, m, worst.left));
        heap.push(Segment::new(&f, m, worst.b, worst.right));
    }
}

/// Integrates over `[lo, hi]` where either endpoint may be infinite.
pub fn integrate<F>(f: F, lo: f64, hi: f64, breaks: &[f64], cfg: &QuadConfig) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_finite(f, lo, hi, breaks, cfg),
        (true, false) => half_line(&f, lo, 1.0, breaks, cfg),
        (false, true) => half_line(&f, hi, -1.0, breaks, cfg),
        (false, false) => {
            let left = half_line(&f, 0.0, -1.0, breaks, cfg)?;
            let right = half_line(&f, 0.0, 1.0, breaks, cfg)?;
            Ok(left + right)
        }
    }
}

/// `[edge, ∞)` for `dir = 1`, `(-∞, edge]` for `dir = -1`. Everything up to
/// twice the distance of the farthest breakpoint (at least unit distance) is
/// integrated directly, so poles and endpoint singularities keep full
/// resolution; the rest is mapped onto `(0, 1]`.
fn half_line<F>(f: &F, edge: f64, dir: f64, breaks: &[f64], cfg: &QuadConfig) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let reach = breaks
        .iter()
        .map(|x| dir * (x - edge))
        .filter(|d| d.is_finite() && *d > 0.0)
        .fold(0.5, f64::max);
    let scale = 2.0 * reach;
    let far = edge + dir * scale;
    let near = integrate_finite(f, edge.min(far), edge.max(far), breaks, cfg)?;
    let mapped = |s: f64| {
        if s < 1e-150 {
            return Complex64::new(0.0, 0.0);
        }
        let u = far + dir * scale * (1.0 / (s * s) - 1.0);
        if !u.is_finite() {
            return Complex64::new(0.0, 0.0);
        }
        f(u) * (2.0 * scale / (s * s * s))
    };
    Ok(near + integrate_finite(mapped, 0.0, 1.0, &[], cfg)?)
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F>(f: F, lo: f64, hi: f64, cfg: &QuadConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    integrate(|u| Complex64::new(f(u), 0.0), lo, hi, &[], cfg).map(|c| c.re)
}

/// Breakpoints clustering around the near-singularity of `1 / (zeta - u)`.
pub fn pole_breaks(zeta: Complex64) -> Vec<f64> {
    let x = zeta.re;
    let y = zeta.im.abs().max(1e-300);
    let mut out = vec![x];
    let mut d = y;
    for _ in 0..5 {
        out.push(x - d);
        out.push(x + d);
        d *= 8.0;
    }
    out
}

/// Composite trapezoid rule on a sampled table, skipping non-finite entries.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .filter(|(_, v)| v[0].is_finite() && v[1].is_finite())
        .map(|(u, v)| 0.5 * (u[1] - u[0]) * (v[0] + v[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let cfg = QuadConfig::default();
        let v = integrate_real(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &cfg).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let cfg = QuadConfig::default();
        let v = integrate_real(|x| 1.0 / x.sqrt(), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn unbounded_cauchy_density() {
        let cfg = QuadConfig::default();
        let pi = std::f64::consts::PI;
        let v = integrate_real(|u| 1.0 / (pi * (1.0 + u * u)), f64::NEG_INFINITY, f64::INFINITY, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        let half = integrate_real(|u| 1.0 / (pi * (1.0 + u * u)), f64::NEG_INFINITY, 0.0, &cfg).unwrap();
        assert!((half - 0.5).abs() < 1e-9);
    }

    #[test]
    fn near_pole_with_breaks() {
        let cfg = QuadConfig::default();
        let zeta = Complex64::new(0.3, 1e-4);
        let v = integrate(|u| 1.0 / (zeta - u), -1.0, 1.0, &pole_breaks(zeta), &cfg).unwrap();
        let exact = ((zeta + 1.0) / (zeta - 1.0)).ln();
        assert!((v - exact).norm() < 1e-9, "{v} vs {exact}");
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadConfig { abs_tol: 1e-14, rel_tol: 0.0, max_intervals: 4 };
        let r = integrate_real(|x| (1.0 / x).sin(), 1e-3, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
