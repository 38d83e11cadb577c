//! Damped Newton iteration for scalar complex equations.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Converged once `|step| <= rel_tol * max(1, |z|)`.
    pub rel_tol: f64,
    pub damping: f64,
    pub max_halvings: usize,
    /// Keep iterates in `Im z > 0`.
    pub confine_upper: bool,
    /// Final `|residual|` must not exceed this.
    pub residual_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 80,
            rel_tol: 1e-12,
            damping: 0.5,
            max_halvings: 40,
            confine_upper: true,
            residual_tol: 1e-9,
        }
    }
}

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Solves `g(z) = 0` where `g` returns `(residual, derivative)`.
pub fn solve<G>(g: G, seed: Complex64, opts: &NewtonOptions) -> Result<Complex64>
where
    G: Fn(Complex64) -> (Complex64, Complex64),
{
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    let mut z = seed;
    if opts.confine_upper && !(z.im > 0.0) {
        return Err(Error::NewtonDivergence { trace: vec![z] });
    }
    let (mut res, mut der) = g(z);
    trace.push(z);
    if !finite(res) {
        return Err(Error::NewtonDivergence { trace });
    }

    for _ in 0..opts.max_iter {
        if res.norm() == 0.0 {
            return Ok(z);
        }
        if !finite(der) || der.norm() == 0.0 {
            break;
        }
        let step = res / der;
        let small = step.norm() <= opts.rel_tol * z.norm().max(1.0);

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = z - step * lambda;
            if finite(trial) && (!opts.confine_upper || trial.im > 0.0) {
                let (r, d) = g(trial);
                if finite(r) && (r.norm() < res.norm() || small) {
                    accepted = Some((trial, r, d));
                    break;
                }
            }
            lambda *= opts.damping;
        }
        match accepted {
            Some((nz, r, d)) => {
                z = nz;
                res = r;
                der = d;
                trace.push(z);
            }
            None => {
                if small && res.norm() <= opts.residual_tol {
                    return Ok(z);
                }
                break;
            }
        }
        if small {
            break;
        }
    }
    if finite(res) && res.norm() <= opts.residual_tol {
        Ok(z)
    } else {
        Err(Error::NewtonDivergence { trace })
    }
}
