//! Cauchy transforms, Voiculescu transforms, Stieltjes inversion, free
//! additive convolution and freely infinitely divisible semigroups.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, DomainTag};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::newton::{self, NewtonOptions};
use crate::quadrature::{pole_breaks, trapezoid};

type Sampler = Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>;

/// A Cauchy transform `G` on `C \ R`. Values below the real axis come from
/// `G(conj ζ) = conj G(ζ)`.
#[derive(Clone)]
pub struct CauchySampler {
    label: String,
    g: Sampler,
    dg: Option<Sampler>,
}

impl std::fmt::Debug for CauchySampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CauchySampler").field("label", &self.label).finish()
    }
}

impl CauchySampler {
    /// Upper half-plane evaluator `g`, optional derivative `dg`.
    pub fn new(
        label: impl Into<String>,
        g: impl Fn(Complex64) -> Result<Complex64> + Send + Sync + 'static,
        dg: Option<Sampler>,
    ) -> Self {
        Self {
            label: label.into(),
            g: Arc::new(g),
            dg,
        }
    }

    /// `G_μ` of a probability measure.
    pub fn from_measure(m: &Measure) -> Result<Self> {
        let mass = m.total_mass()?;
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::NotProbability { mass });
        }
        let a = m.clone();
        let d = m.clone();
        Ok(Self::new(
            "measure",
            move |z| a.integrate(|u| 1.0 / (z - u), &pole_breaks(z)),
            Some(Arc::new(move |z| {
                d.integrate(|u| -1.0 / ((z - u) * (z - u)), &pole_breaks(z))
            })),
        ))
    }

    /// A directly supplied `G`.
    pub fn from_fn(g: AnalyticFn) -> Self {
        let d = g.clone();
        let label = g.label().to_string();
        Self::new(
            label,
            move |z| g.try_eval(z),
            Some(Arc::new(move |z| Ok(d.derivative(z)))),
        )
    }

    /// `G_{μ_t}` for the semigroup with Voiculescu transform `tφ`.
    pub fn semigroup(phi: &AnalyticFn, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("semigroup time must be >= 0, got {t}")));
        }
        let a = phi.clone();
        let d = phi.clone();
        Ok(Self::new(
            format!("semigroup({}, t={t})", phi.label()),
            move |z| subordination_root(&a, t, z).map(|w| 1.0 / w),
            Some(Arc::new(move |z| {
                let w = subordination_root(&d, t, z)?;
                let dw = 1.0 / (1.0 + d.derivative(w) * t);
                Ok(-dw / (w * w))
            })),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z.im > 0.0 {
            (self.g)(z)
        } else if z.im < 0.0 {
            Ok((self.g)(z.conj())?.conj())
        } else {
            Err(Error::Domain(format!("Cauchy transform needs Im z != 0, got {z}")))
        }
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        if z.im < 0.0 {
            return Ok(self.derivative(z.conj())?.conj());
        }
        match &self.dg {
            Some(dg) => dg(z),
            None => {
                let h = 1e-6 * z.norm().max(1.0);
                Ok((self.eval(z + h)? - self.eval(z - h)?) / (2.0 * h))
            }
        }
    }
}

/// `∫ (ζ − u)^-1 m(du)` for a probability measure `m`.
pub fn cauchy_transform(m: &Measure, zeta: Complex64) -> Result<Complex64> {
    CauchySampler::from_measure(m)?.eval(zeta)
}

/// `Γ_{γ,λ} = {x + iy : y > 0, |x| < γy, |z| ≥ λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionDomain {
    pub gamma: f64,
    pub lambda: f64,
}

impl InversionDomain {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma > 0.0 && lambda > 0.0) {
            return Err(Error::Invalid(format!("inversion domain needs gamma, lambda > 0, got ({gamma}, {lambda})")));
        }
        Ok(Self { gamma, lambda })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.im > 0.0 && z.re.abs() < self.gamma * z.im && z.norm() >= self.lambda
    }

    /// Smallest `λ = 2^k` (k = 0..=20) such that `F(w) = z` converges from
    /// the seed `w = z` at every probe of the truncated cone.
    pub fn estimate(g: &CauchySampler, gamma: f64) -> Result<Self> {
        let edge = (1.0 / gamma).atan();
        let angles: Vec<f64> = (0..7)
            .map(|j| edge + (PI - 2.0 * edge) * (j as f64 + 0.5) / 7.0)
            .collect();
        for k in 0..=20 {
            let lambda = 2f64.powi(k);
            let ok = [1.0, 2.0, 8.0].iter().all(|r| {
                angles
                    .iter()
                    .all(|&th| invert_f(g, Complex64::from_polar(lambda * r, th)).is_ok())
            });
            if ok {
                return Self::new(gamma, lambda);
            }
        }
        Err(Error::Invalid("no inversion domain found up to lambda = 2^20".into()))
    }
}

/// Solves `F_μ(w) = 1/G_μ(w) = z` from the seed `w = z`.
fn invert_f(g: &CauchySampler, z: Complex64) -> Result<Complex64> {
    let residual = |w: Complex64| -> (Complex64, Complex64) {
        match (g.eval(w), g.derivative(w)) {
            (Ok(gw), Ok(dg)) => (1.0 / gw - z, -dg / (gw * gw)),
            _ => (Complex64::new(f64::NAN, f64::NAN), Complex64::new(f64::NAN, f64::NAN)),
        }
    };
    newton::solve(residual, z, &NewtonOptions::default())
}

/// `φ_μ(z) = F_μ^-1(z) − z`. With a domain given, `z` must lie in it.
pub fn voiculescu_transform(g: &CauchySampler, z: Complex64, domain: Option<&InversionDomain>) -> Result<Complex64> {
    if let Some(d) = domain {
        if !d.contains(z) {
            return Err(Error::OutsideInversionDomain { z });
        }
    } else if !(z.im > 0.0) {
        return Err(Error::OutsideInversionDomain { z });
    }
    Ok(invert_f(g, z)? - z)
}

/// Sampled density with per-point flags.
#[derive(Debug, Clone, Serialize)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    /// `true` where the sampler failed and the entry is NaN.
    pub failed: Vec<bool>,
    /// Points whose extrapolated value was negative and set to 0.
    pub clamped: usize,
    /// `1 − ∫ density` (trapezoid over the grid).
    pub mass_deficit: f64,
}

/// `density(x) ≈ −Im G(x + iε)/π`, Richardson-extrapolated from `(ε, ε/2)`.
pub fn stieltjes_invert(g: &CauchySampler, x_grid: &[f64], eps: f64) -> Result<DensityTable> {
    if !(eps > 0.0) {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    let mut density = Vec::with_capacity(x_grid.len());
    let mut failed = Vec::with_capacity(x_grid.len());
    let mut clamped = 0;
    for &x in x_grid {
        let d = |e: f64| g.eval(Complex64::new(x, e)).map(|v| -v.im / PI);
        match (d(eps), d(eps / 2.0)) {
            (Ok(d1), Ok(d2)) => {
                let mut v = 2.0 * d2 - d1;
                if v < 0.0 {
                    clamped += 1;
                    v = 0.0;
                }
                density.push(v);
                failed.push(false);
            }
            _ => {
                density.push(f64::NAN);
                failed.push(true);
            }
        }
    }
    let mass_deficit = 1.0 - trapezoid(x_grid, &density);
    Ok(DensityTable {
        x: x_grid.to_vec(),
        density,
        failed,
        clamped,
        mass_deficit,
    })
}

/// `φ_{λ⊞μ} = φ_λ + φ_μ`.
pub fn free_convolve(phi1: &AnalyticFn, phi2: &AnalyticFn) -> AnalyticFn {
    phi1.sum(phi2)
}

/// `G(ζ)` of the law with Voiculescu transform `φ`: solve `w + φ(w) = ζ`.
pub fn reconstruct_cauchy(phi: &AnalyticFn, zeta: Complex64) -> Result<Complex64> {
    semigroup_marginal(phi, 1.0, zeta)
}

fn solve_subordination(phi: &AnalyticFn, t: f64, zeta: Complex64, seed: Complex64) -> Result<Complex64> {
    let g = |w: Complex64| {
        let v = phi.eval(w);
        (w + v * t - zeta, 1.0 + phi.derivative(w) * t)
    };
    newton::solve(g, seed, &NewtonOptions::default())
}

/// Root `w ∈ C+` of `w + tφ(w) = ζ` (`ζ ∈ C+`). Falls back to continuation
/// in `t` from 0 with steps of at most 0.1, halved on failure.
pub fn subordination_root(phi: &AnalyticFn, t: f64, zeta: Complex64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("semigroup time must be >= 0, got {t}")));
    }
    if !(zeta.im > 0.0) {
        return Err(Error::Domain(format!("subordination needs Im ζ > 0, got {zeta}")));
    }
    if t == 0.0 {
        return Ok(zeta);
    }
    let direct = solve_subordination(phi, t, zeta, zeta);
    if direct.is_ok() {
        return direct;
    }
    let mut s = 0.0;
    let mut w = zeta;
    let mut h = t.min(0.1);
    let mut trace = vec![zeta];
    while s < t {
        let next = (s + h).min(t);
        match solve_subordination(phi, next, zeta, w) {
            Ok(v) => {
                s = next;
                w = v;
                trace.push(w);
                h = (2.0 * h).min(0.1);
            }
            Err(_) => {
                h *= 0.5;
                if h < 1e-8 * t.max(1.0) {
                    return Err(Error::NewtonDivergence { trace });
                }
            }
        }
    }
    Ok(w)
}

/// `G_{μ_t}(ζ)` where `φ_{μ_t} = tφ`.
pub fn semigroup_marginal(phi: &AnalyticFn, t: f64, zeta: Complex64) -> Result<Complex64> {
    if zeta.im < 0.0 {
        return Ok(semigroup_marginal(phi, t, zeta.conj())?.conj());
    }
    Ok(1.0 / subordination_root(phi, t, zeta)?)
}

/// `φ(z) = 1/z`: the semicircle generator.
pub fn semicircle_generator() -> AnalyticFn {
    AnalyticFn::new("inv", DomainTag::UpperHalfPlane, |z| 1.0 / z).with_derivative(|z| -1.0 / (z * z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cauchy_transform_examples() {
        let z = c(0.7, 1.3);
        let g = cauchy_transform(&Measure::dirac(0.5), z).unwrap();
        assert!((g - 1.0 / (z - 0.5)).norm() < 1e-14);

        let g = cauchy_transform(&Measure::semicircle(1.0).unwrap(), c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, (2.0 - 8f64.sqrt()) / 2.0)).norm() < 1e-9, "{g}");

        let g = cauchy_transform(&Measure::cauchy(1.0).unwrap(), c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, -1.0 / 3.0)).norm() < 1e-9, "{g}");
    }

    #[test]
    fn cauchy_transform_rejects_real_point_and_non_probability() {
        assert!(matches!(
            cauchy_transform(&Measure::dirac(0.0), c(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let m = Measure::atomic(&[(0.0, 2.0)]).unwrap();
        assert!(matches!(cauchy_transform(&m, c(0.0, 1.0)), Err(Error::NotProbability { .. })));
    }

    #[test]
    fn conjugate_symmetry() {
        let g = CauchySampler::from_measure(&Measure::semicircle(1.0).unwrap()).unwrap();
        let z = c(0.4, 0.9);
        assert!((g.eval(z.conj()).unwrap() - g.eval(z).unwrap().conj()).norm() < 1e-10);
    }

    #[test]
    fn voiculescu_examples() {
        let g = CauchySampler::from_measure(&Measure::dirac(1.5)).unwrap();
        let v = voiculescu_transform(&g, c(0.3, 5.0), None).unwrap();
        assert!((v - c(1.5, 0.0)).norm() < 1e-12);

        let g = CauchySampler::from_measure(&Measure::semicircle(1.0).unwrap()).unwrap();
        let v = voiculescu_transform(&g, c(0.0, 4.0), None).unwrap();
        assert!((v - c(0.0, -0.25)).norm() < 1e-8, "{v}");

        let g = CauchySampler::from_measure(&Measure::cauchy(1.0).unwrap()).unwrap();
        let v = voiculescu_transform(&g, c(0.0, 3.0), None).unwrap();
        assert!((v - c(0.0, -1.0)).norm() < 1e-8, "{v}");
    }

    #[test]
    fn inversion_domain_is_estimated_and_enforced() {
        let g = CauchySampler::from_measure(&Measure::semicircle(1.0).unwrap()).unwrap();
        let d = InversionDomain::estimate(&g, 1.0).unwrap();
        assert!(d.lambda <= 8.0);
        assert!(matches!(
            voiculescu_transform(&g, c(100.0, 1.0), Some(&d)),
            Err(Error::OutsideInversionDomain { .. })
        ));
    }

    #[test]
    fn stieltjes_examples() {
        let semi = CauchySampler::from_measure(&Measure::semicircle(1.0).unwrap()).unwrap();
        let t = stieltjes_invert(&semi, &[0.0], 1e-3).unwrap();
        assert!((t.density[0] - 1.0 / PI).abs() < 1e-4);

        let atom = CauchySampler::from_fn(AnalyticFn::new("inv", DomainTag::UpperHalfPlane, |z| 1.0 / z));
        let grid: Vec<f64> = (0..201).map(|i| -2.0 + 0.02 * i as f64).filter(|x| x.abs() > 1e-9).collect();
        let t = stieltjes_invert(&atom, &grid, 1e-3).unwrap();
        assert!(t.density.iter().zip(&grid).filter(|(_, x)| x.abs() >= 0.5).all(|(d, _)| d.abs() < 1e-6));
        assert!((t.mass_deficit - 1.0).abs() < 0.05, "{}", t.mass_deficit);

        let cauchy = CauchySampler::from_measure(&Measure::cauchy(1.0).unwrap()).unwrap();
        let t = stieltjes_invert(&cauchy, &[0.0], 1e-3).unwrap();
        assert!((t.density[0] - 1.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn free_convolution_examples() {
        let inv = semicircle_generator();
        let sum = free_convolve(&inv, &inv);
        let z = c(0.3, 2.0);
        assert!((sum.eval(z) - 2.0 / z).norm() < 1e-14);
        let g = CauchySampler::new("sum", move |z| reconstruct_cauchy(&sum, z), None);
        let d = stieltjes_invert(&g, &[0.0], 1e-3).unwrap();
        assert!((d.density[0] - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-4);

        let a = AnalyticFn::constant(c(0.5, 0.0));
        let b = AnalyticFn::constant(c(-2.0, 0.0));
        assert_eq!(free_convolve(&a, &b).eval(z), c(-1.5, 0.0));

        let m = AnalyticFn::constant(c(0.0, -1.0));
        let s = free_convolve(&m, &m);
        assert_eq!(s.eval(z), c(0.0, -2.0));
        let zeta = c(0.4, 0.5);
        let g = reconstruct_cauchy(&s, zeta).unwrap();
        assert!((g - 1.0 / (zeta + c(0.0, 2.0))).norm() < 1e-12);
    }

    #[test]
    fn semigroup_examples() {
        let g = semigroup_marginal(&semicircle_generator(), 1.0, c(0.0, 2.0)).unwrap();
        assert!((g - c(0.0, (2.0 - 8f64.sqrt()) / 2.0)).norm() < 1e-12, "{g}");

        let zeta = c(-0.3, 0.8);
        let g = semigroup_marginal(&AnalyticFn::neg_pow(0.5), 0.0, zeta).unwrap();
        assert!((g - 1.0 / zeta).norm() < 1e-15);

        let g = semigroup_marginal(&AnalyticFn::constant(c(0.0, -1.0)), 2.0, Complex64::i()).unwrap();
        assert!((g - c(0.0, -1.0 / 3.0)).norm() < 1e-12);

        assert!(matches!(
            semigroup_marginal(&semicircle_generator(), -1.0, zeta),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn semigroup_density_near_real_axis() {
        let g = CauchySampler::semigroup(&semicircle_generator(), 2.0).unwrap();
        let grid: Vec<f64> = (0..41).map(|i| -2.6 + 0.13 * i as f64).collect();
        let t = stieltjes_invert(&g, &grid, 1e-3).unwrap();
        for (x, d) in grid.iter().zip(&t.density) {
            let exact = (8.0 - x * x).max(0.0).sqrt() / (4.0 * PI);
            assert!((d - exact).abs() < 1e-3, "{x}: {d} vs {exact}");
        }
    }
}
