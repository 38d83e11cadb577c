//! Dormand–Prince 5(4) for autonomous scalar complex equations `y' = f(y)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            min_step: 1e-12,
            max_steps: 200_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Integrates from `y0` over `[0, t_end]`. A trial step is rejected when
/// `admissible` fails at any stage or at the result, or when `f` returns a
/// non-finite value; the step is then halved.
pub fn integrate<F, A>(f: F, admissible: A, y0: Complex64, t_end: f64, cfg: &OdeConfig) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
    A: Fn(Complex64) -> bool,
{
    if t_end == 0.0 {
        return Ok(y0);
    }
    if !(t_end > 0.0) {
        return Err(Error::Invalid(format!("integration end must be >= 0, got {t_end}")));
    }
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(y);
    if !finite(k1) {
        return Err(Error::EvaluatorFailure { z: y });
    }
    let scale0 = cfg.abs_tol + cfg.rel_tol * y.norm();
    let mut h = (0.01 * scale0.max(1e-6) / k1.norm().max(1e-300)).clamp(1e-6 * t_end, 0.1 * t_end);
    h = h.max(cfg.min_step);

    for _ in 0..cfg.max_steps {
        if t >= t_end {
            return Ok(y);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let step = (|| {
            let y2 = y + k1 * (h * A21);
            if !admissible(y2) {
                return None;
            }
            let k2 = f(y2);
            let y3 = y + (k1 * A31 + k2 * A32) * h;
            if !finite(k2) || !admissible(y3) {
                return None;
            }
            let k3 = f(y3);
            let y4 = y + (k1 * A41 + k2 * A42 + k3 * A43) * h;
            if !finite(k3) || !admissible(y4) {
                return None;
            }
            let k4 = f(y4);
            let y5 = y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h;
            if !finite(k4) || !admissible(y5) {
                return None;
            }
            let k5 = f(y5);
            let y6 = y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h;
            if !finite(k5) || !admissible(y6) {
                return None;
            }
            let k6 = f(y6);
            let yn = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
            if !finite(k6) || !admissible(yn) {
                return None;
            }
            let k7 = f(yn);
            if !finite(k7) {
                return None;
            }
            let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let sc = cfg.abs_tol + cfg.rel_tol * y.norm().max(yn.norm());
            Some((yn, k7, err.norm() / sc))
        })();

        match step {
            Some((yn, k7, ratio)) if ratio <= 1.0 => {
                t = if last { t_end } else { t + h };
                y = yn;
                k1 = k7;
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h *= grow;
            }
            Some((_, _, ratio)) => {
                h *= (0.9 * ratio.powf(-0.2)).clamp(0.2, 0.9);
            }
            None => {
                h *= 0.5;
            }
        }
        if t < t_end && h < cfg.min_step {
            return Err(Error::StepUnderflow { time: t, state: y });
        }
    }
    if t >= t_end {
        Ok(y)
    } else {
        Err(Error::StepUnderflow { time: t, state: y })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = integrate(|y| -y, |_| true, Complex64::new(1.0, 0.0), 2.0, &OdeConfig::default()).unwrap();
        assert!((y.re - (-2f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation() {
        let i = Complex64::i();
        let y = integrate(|y| i * y, |_| true, Complex64::new(1.0, 0.0), 1.0, &OdeConfig::default()).unwrap();
        assert!((y - Complex64::from_polar(1.0, 1.0)).norm() < 1e-8);
    }

    #[test]
    fn boundary_gives_underflow() {
        // y' = -i hits Im y = 0 at t = 1
        let r = integrate(
            |_| Complex64::new(0.0, -1.0),
            |y| y.im > 0.0,
            Complex64::i(),
            2.0,
            &OdeConfig::default(),
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
