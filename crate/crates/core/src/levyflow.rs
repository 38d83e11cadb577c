//! Generators `φ` of composition semigroups `F_t` on `C+`
//! (`∂F_t/∂t + φ(F_t) = 0`, `F_0 = id`), their conformal factorization
//! `φ = ψ∘Φ`, the FAL2 falsifier, marginal laws and transition kernels.

use num_complex::Complex64;
use serde::Serialize;

use crate::analytic::{AnalyticFn, DomainTag};
use crate::cauchy::{stieltjes_invert, CauchySampler};
use crate::conformal::{ConformalPair, Containment, PsiForm};
use crate::error::{Error, Result};
use crate::nevanlinna::{is_nevanlinna_numeric, NevanlinnaVerdict, SamplingPlan};
use crate::newton::{self, NewtonOptions};
use crate::ode::{self, OdeConfig};

fn nan() -> Complex64 {
    Complex64::new(f64::NAN, f64::NAN)
}

/// How `F_t` is evaluated.
#[derive(Debug, Clone)]
pub enum Route {
    /// `F_t(z) = Ψ(Φ(z) + κt)` for `φ = κ·ψ∘Φ`.
    Conformal { pair: ConformalPair, kappa: f64, certificate: Containment },
    /// `φ ≡ c`, `F_t(z) = z − ct`.
    Constant(Complex64),
    /// Numerical integration of the flow equation only.
    Ode,
}

#[derive(Debug, Clone)]
pub struct FlowField {
    phi: AnalyticFn,
    route: Route,
    ode: OdeConfig,
}

/// Outcome of the asymptotic check `φ(iy)/(iy) → 0`.
#[derive(Debug, Clone, Serialize)]
pub struct Asymptotics {
    /// `(y, |φ(iy)/(iy)|)` on the ladder `y = 10^k`.
    pub ladder: Vec<(f64, f64)>,
    /// Log-log slope between the two largest rungs.
    pub slope: f64,
    pub vanishes: bool,
}

/// `|φ(iy)/(iy)|` on `y = 10^2 … 10^10`. The ratio vanishes at infinity when it
/// is already below `1e-4` at `y = 10^6` or decays like a negative power of `y`.
pub fn asymptotic_ratio(phi: &AnalyticFn) -> Result<Asymptotics> {
    let mut ladder = Vec::new();
    for k in 2..=10 {
        let y = 10f64.powi(k);
        let z = Complex64::new(0.0, y);
        ladder.push((y, (phi.try_eval(z)? / z).norm()));
    }
    let n = ladder.len();
    let (r0, r1) = (ladder[n - 5].1, ladder[n - 1].1);
    let slope = if r0 > 0.0 && r1 > 0.0 {
        (r1 / r0).log10() / 4.0
    } else {
        f64::NEG_INFINITY
    };
    let at_1e6 = ladder[4].1;
    let vanishes = at_1e6 <= 1e-4 || slope <= -0.05;
    Ok(Asymptotics { ladder, slope, vanishes })
}

impl FlowField {
    fn validated(phi: AnalyticFn, route: Route) -> Result<Self> {
        let verdict = is_nevanlinna_numeric(&phi, &SamplingPlan::coarse())?;
        if let NevanlinnaVerdict::Fail { witness, .. } = verdict {
            let z = Complex64::new(witness[0], witness[1]);
            return Err(Error::NotNevanlinna { z, value: phi.eval(z) });
        }
        let asym = asymptotic_ratio(&phi)?;
        if !asym.vanishes {
            return Err(Error::Invalid(format!(
                "generator grows linearly: |phi(iy)/(iy)| ladder {:?}",
                asym.ladder
            )));
        }
        Ok(Self {
            phi,
            route,
            ode: OdeConfig::default(),
        })
    }

    /// Generator without a known factorization; the flow uses the ODE route.
    pub fn new(phi: AnalyticFn) -> Result<Self> {
        Self::validated(phi, Route::Ode)
    }

    /// `φ ≡ c` with `Im c ≤ 0`.
    pub fn constant(c: Complex64) -> Result<Self> {
        if c.im > 0.0 {
            return Err(Error::Invalid(format!("constant generator needs Im c <= 0, got {c}")));
        }
        Self::validated(AnalyticFn::constant(c), Route::Constant(c))
    }

    /// `φ(w) = −w^ρ`. For `ρ ≤ 1/2` this factors as `κ·ψ∘Φ` with
    /// `ψ = −z^σ`, `σ = ρ/(1 − ρ)`, `κ = (σ + 1)^-ρ`; otherwise the ODE route is used.
    pub fn neg_pow(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Invalid(format!("negPow generator needs 0 < rho < 1, got {rho}")));
        }
        let phi = AnalyticFn::neg_pow(rho);
        if rho <= 0.5 {
            let sigma = rho / (1.0 - rho);
            let pair = ConformalPair::new(PsiForm::power(sigma)?)?.normalize()?;
            let certificate = pair.containment()?;
            let kappa = (sigma + 1.0).powf(-rho);
            return Self::validated(phi, Route::Conformal { pair, kappa, certificate });
        }
        Self::new(phi)
    }

    pub fn with_ode(mut self, cfg: OdeConfig) -> Self {
        self.ode = cfg;
        self
    }

    pub fn phi(&self) -> &AnalyticFn {
        &self.phi
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn pair(&self) -> Option<&ConformalPair> {
        match &self.route {
            Route::Conformal { pair, .. } => Some(pair),
            _ => None,
        }
    }

    /// Same field with a fresh inversion cache, so that results computed on
    /// separate threads do not depend on each other's seeds.
    pub fn detached(&self) -> Self {
        let mut out = self.clone();
        if let Route::Conformal { pair, .. } = &mut out.route {
            *pair = pair.with_shift(pair.shift());
        }
        out
    }

    pub fn has_closed_route(&self) -> bool {
        !matches!(self.route, Route::Ode)
    }

    /// `F_t(z) = Ψ(Φ(z) + κt)`; negative `t` must land back in `C+`.
    pub fn flow_conformal(&self, z: Complex64, t: f64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("flow needs Im z > 0, got {z}")));
        }
        if t == 0.0 {
            return Ok(z);
        }
        let out = match &self.route {
            Route::Conformal { pair, kappa, .. } => {
                let zeta = pair.invert(z)? + kappa * t;
                if !(zeta.im > 0.0) {
                    return Err(Error::OutsideImage { w: z });
                }
                pair.primitive(zeta)?
            }
            Route::Constant(c) => z - c * t,
            Route::Ode => return Err(Error::NoConformalPair),
        };
        if t < 0.0 && !(out.im > 0.0) {
            return Err(Error::OutsideImage { w: z });
        }
        Ok(out)
    }

    /// Integrates `F' = −φ(F)` from `F_0 = z`, rejecting steps that leave `C+`.
    pub fn flow_ode(&self, z: Complex64, t: f64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("flow needs Im z > 0, got {z}")));
        }
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("ODE route needs t >= 0, got {t}")));
        }
        let phi = &self.phi;
        ode::integrate(|w| -phi.eval(w), |w| w.im > 0.0, z, t, &self.ode)
    }

    /// Conformal route when available, ODE otherwise.
    pub fn flow(&self, z: Complex64, t: f64) -> Result<Complex64> {
        if self.has_closed_route() {
            self.flow_conformal(z, t)
        } else {
            self.flow_ode(z, t)
        }
    }

    /// `F_t^-1(z)`, required to lie in `C+`.
    pub fn flow_inverse(&self, z: Complex64, t: f64) -> Result<Complex64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("inverse flow needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(z);
        }
        if self.has_closed_route() {
            return self.flow_conformal(z, -t);
        }
        if !(z.im > 0.0) {
            return Err(Error::OutsideImage { w: z });
        }
        // Backward integration gives the seed; Newton on the forward flow polishes.
        let phi = &self.phi;
        let seed = ode::integrate(|w| phi.eval(w), |w| w.im > 0.0, z, t, &self.ode).unwrap_or(z);
        let opts = NewtonOptions {
            residual_tol: 1e-8 * z.norm().max(1.0),
            ..NewtonOptions::default()
        };
        let g = |w: Complex64| {
            let h = 1e-6 * w.norm().max(1.0);
            match (self.flow_ode(w, t), self.flow_ode(w + h, t), self.flow_ode(w - h, t)) {
                (Ok(f), Ok(fp), Ok(fm)) => (f - z, (fp - fm) / (2.0 * h)),
                _ => (nan(), nan()),
            }
        };
        newton::solve(g, seed, &opts).map_err(|_| Error::OutsideImage { w: z })
    }

    /// `(F_t^-1(w), φ(F_t^-1(w)))` continued analytically off `F_t(C+)`:
    /// exactly through the factorization, or by integrating `w' = φ(w)`
    /// backwards inside the declared domain of `φ`.
    pub fn continued_inverse(&self, w: Complex64, t: f64) -> Result<(Complex64, Complex64)> {
        match &self.route {
            Route::Conformal { pair, kappa, .. } => {
                let zeta = pair.invert(w)? - kappa * t;
                if !(zeta.im > 0.0) {
                    return Err(Error::OutsideImage { w });
                }
                Ok((pair.primitive(zeta)?, pair.psi(zeta)? * *kappa))
            }
            Route::Constant(c) => Ok((w + c * t, *c)),
            Route::Ode => {
                let phi = &self.phi;
                let domain = phi.domain();
                let admissible = move |v: Complex64| match domain {
                    DomainTag::SlitPlane => v.im > 0.0 || v.re > 0.0,
                    _ => v.im > 0.0,
                };
                let z = ode::integrate(|v| phi.eval(v), admissible, w, t, &self.ode)
                    .map_err(|_| Error::OutsideImage { w })?;
                Ok((z, phi.try_eval(z)?))
            }
        }
    }
}

/// Build the FAL2 generator `φ = ψ∘Φ` from `ψ` whose primitive image
/// contains a translate of `C+`.
pub fn build_fal2(psi: PsiForm) -> Result<FlowField> {
    let pair = ConformalPair::new(psi)?;
    let certificate = pair.containment()?;
    if !certificate.contains {
        return Err(Error::NotContaining);
    }
    let pair = pair.normalize()?;
    let (p, d) = (pair.clone(), pair.clone());
    let label = format!("fal2({})", pair.form().label());
    let phi = AnalyticFn::new(label, DomainTag::UpperHalfPlane, move |w| {
        p.invert(w).and_then(|z| p.psi(z)).unwrap_or_else(|_| nan())
    })
    .with_derivative(move |w| {
        // φ' = ψ'(z)·Φ'(w) = −ψ'(z)/ψ(z)
        let z = match d.invert(w) {
            Ok(z) => z,
            Err(_) => return nan(),
        };
        match (d.form().derivative(z), d.psi(z)) {
            (Ok(dp), Ok(p)) => -dp / p,
            _ => nan(),
        }
    });
    FlowField::validated(
        phi,
        Route::Conformal {
            pair,
            kappa: 1.0,
            certificate,
        },
    )
}

/// Constant branch: `φ ≡ c`, `Im c < 0`.
pub fn build_fal2_constant(c: Complex64) -> Result<FlowField> {
    if !(c.im < 0.0) {
        return Err(Error::Invalid(format!("constant branch needs Im c < 0, got {c}")));
    }
    FlowField::constant(c)
}

#[derive(Debug, Clone, Serialize)]
pub struct Fal2Options {
    pub t_samples: Vec<f64>,
    pub plan_radii: usize,
    pub plan_angles: usize,
    pub tol: f64,
    /// Fraction of failed inversions above which a clean run is inconclusive.
    pub inconclusive_fraction: f64,
}

impl Default for Fal2Options {
    fn default() -> Self {
        Self {
            t_samples: vec![0.1, 0.5, 1.0, 5.0],
            plan_radii: 64,
            plan_angles: 64,
            tol: 1e-8,
            inconclusive_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Fal2Verdict {
    /// No violation found on the sampled points (a falsifier, not a proof).
    Pass { points_checked: usize, inversion_failures: usize },
    Fail { t: f64, witness: [f64; 2], detail: String },
    Inconclusive { t: f64, failure_fraction: f64 },
}

impl Fal2Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Fal2Verdict::Pass { .. })
    }
    pub fn is_fail(&self) -> bool {
        matches!(self, Fal2Verdict::Fail { .. })
    }
}

/// Hyperbolic distance in `C+` (curvature −1); `+∞` when a point is not in `C+`.
fn hyperbolic(a: Complex64, b: Complex64) -> f64 {
    if a == b {
        return 0.0;
    }
    if !(a.im > 0.0 && b.im > 0.0) {
        return f64::INFINITY;
    }
    (1.0 + (a - b).norm_sqr() / (2.0 * a.im * b.im)).acosh()
}

/// Searches for a pair `w1, w2 ∈ F_t(C+)` where `w ↦ −φ(F_t^-1(w))` expands
/// the hyperbolic metric, which no Nevanlinna function can do. Samples are
/// taken on the preimage side, `w = F_t(z)`, so no inversion is needed.
fn schwarz_pick_witness(ff: &FlowField, t: f64, tol: f64) -> Option<(Complex64, String)> {
    let tight = OdeConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        min_step: 1e-14,
        ..ff.ode
    };
    let phi = &ff.phi;
    let xs: Vec<f64> = (0..81).map(|j| -10.0 + 0.25 * j as f64).collect();
    for k in 1..=6 {
        let y = 10f64.powi(-k);
        let mut prev: Option<(Complex64, Complex64)> = None;
        for &x in &xs {
            let z = Complex64::new(x, y);
            let sample = ode::integrate(|w| -phi.eval(w), |w| w.im > 0.0, z, t, &tight)
                .ok()
                .and_then(|w| phi.try_eval(z).ok().map(|h| (w, -h)));
            if let (Some((w1, h1)), Some((w2, h2))) = (prev, sample) {
                let dw = hyperbolic(w1, w2);
                let dh = hyperbolic(h1, h2);
                if dh > dw * (1.0 + tol) + tol {
                    let detail = format!(
                        "hyperbolic expansion between w1={w1} and w2={w2}: {dh:.9e} > {dw:.9e}"
                    );
                    return Some((w1, detail));
                }
            }
            prev = sample;
        }
    }
    None
}

/// FAL2 falsifier: `φ∘F_t^-1` must continue to `C+` with values in `C−∪R`.
pub fn fal2_check(ff: &FlowField, opts: &Fal2Options) -> Result<Fal2Verdict> {
    let plan = SamplingPlan {
        radii: opts.plan_radii,
        angles: opts.plan_angles,
        ..SamplingPlan::default()
    };
    let pts = plan.points();
    let mut checked = 0;
    let mut failures = 0;
    let mut worst: Option<(f64, f64)> = None;
    for &t in &opts.t_samples {
        let mut t_fail = 0;
        for &w in &pts {
            match ff.continued_inverse(w, t) {
                Ok((_, h)) => {
                    checked += 1;
                    if h.im > opts.tol {
                        return Ok(Fal2Verdict::Fail {
                            t,
                            witness: [w.re, w.im],
                            detail: format!("Im phi(F_t^-1(w)) = {:.6e} > 0", h.im),
                        });
                    }
                }
                Err(_) => t_fail += 1,
            }
        }
        if !ff.has_closed_route() {
            if let Some((w, detail)) = schwarz_pick_witness(ff, t, 1e-8) {
                return Ok(Fal2Verdict::Fail {
                    t,
                    witness: [w.re, w.im],
                    detail,
                });
            }
        }
        let frac = t_fail as f64 / pts.len() as f64;
        if worst.map_or(true, |(_, f)| frac > f) {
            worst = Some((t, frac));
        }
        failures += t_fail;
    }
    if let Some((t, frac)) = worst {
        if frac > opts.inconclusive_fraction {
            return Ok(Fal2Verdict::Inconclusive { t, failure_fraction: frac });
        }
    }
    Ok(Fal2Verdict::Pass {
        points_checked: checked,
        inversion_failures: failures,
    })
}

/// Density table of a law or kernel at time `t`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelSlice {
    pub t: f64,
    pub x: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub failed: Vec<bool>,
    pub clamped: usize,
    pub mass_deficit: f64,
}

fn kernel_sampler(ff: &FlowField, t: f64, x: f64) -> CauchySampler {
    let f = ff.clone();
    CauchySampler::new(format!("kernel(t={t}, x={x})"), move |z| Ok(1.0 / (f.flow(z, t)? - x)), None)
}

/// `k_t(x, du)`: `∫ (ζ − u)^-1 k_t(x, du) = 1/(F_t(ζ) − x)`.
pub fn transition_kernel(ff: &FlowField, t: f64, x: f64, grid: &[f64], eps: f64) -> Result<KernelSlice> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("kernel needs t >= 0, got {t}")));
    }
    let table = stieltjes_invert(&kernel_sampler(ff, t, x), grid, eps)?;
    Ok(KernelSlice {
        t,
        x,
        grid: table.x,
        density: table.density,
        failed: table.failed,
        clamped: table.clamped,
        mass_deficit: table.mass_deficit,
    })
}

/// Law at time `t` of the process started at `δ_0`: `G_{μ_t} = 1/F_t`.
pub fn marginal_law(ff: &FlowField, t: f64, grid: &[f64], eps: f64) -> Result<KernelSlice> {
    transition_kernel(ff, t, 0.0, grid, eps)
}

/// `φ_{μ_{s,t}}(z) = φ_{μ_t}(z) − φ_{μ_s}(z) = F_t^-1(z) − F_s^-1(z)`.
pub fn increment_transform(ff: &FlowField, s: f64, t: f64, z: Complex64) -> Result<Complex64> {
    if !(s >= 0.0 && t >= s) {
        return Err(Error::Domain(format!("increment needs 0 <= s <= t, got ({s}, {t})")));
    }
    if s == t {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(ff.flow_inverse(z, t)? - ff.flow_inverse(z, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nevanlinna::RationalNevanlinna;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn neg_sqrt2() -> FlowField {
        let lin = RationalNevanlinna::new(-1.0, 0.0, vec![], vec![]).unwrap();
        build_fal2(PsiForm::Rational(lin)).unwrap()
    }

    fn closed(z: Complex64, t: f64) -> Complex64 {
        z + (2.0 * z).sqrt() * t + t * t / 2.0
    }

    #[test]
    fn build_examples() {
        let ff = build_fal2(PsiForm::power(0.5).unwrap()).unwrap();
        for w in [c(0.3, 0.4), c(-2.0, 1.0), c(5.0, 0.01)] {
            let exact = -(w * 1.5).powf(1.0 / 3.0);
            assert!((ff.phi().eval(w) - exact).norm() < 1e-8, "{w}");
        }
        let ff = build_fal2_constant(c(0.0, -1.0)).unwrap();
        assert_eq!(ff.phi().eval(c(3.0, 2.0)), c(0.0, -1.0));
        let ff = neg_sqrt2();
        for w in [c(0.3, 0.4), c(-2.0, 1.0)] {
            assert!((ff.phi().eval(w) + (2.0 * w).sqrt()).norm() < 1e-8);
        }
    }

    #[test]
    fn build_rejects_non_containing() {
        let inv = RationalNevanlinna::new(0.0, 0.0, vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(build_fal2(PsiForm::Rational(inv)), Err(Error::NotContaining)));
    }

    #[test]
    fn flow_examples() {
        let ff = neg_sqrt2();
        let i = Complex64::i();
        assert!((ff.flow_conformal(i, 1.0).unwrap() - c(1.5, 2.0)).norm() < 1e-10);
        assert!((ff.flow_ode(i, 1.0).unwrap() - c(1.5, 2.0)).norm() < 1e-6);
        assert_eq!(ff.flow_conformal(c(0.2, 0.3), 0.0).unwrap(), c(0.2, 0.3));
        assert_eq!(ff.flow_ode(c(0.2, 0.3), 0.0).unwrap(), c(0.2, 0.3));

        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        assert!((k.flow_conformal(i, 2.0).unwrap() - c(0.0, 3.0)).norm() < 1e-14);

        let inv = FlowField::new(crate::cauchy::semicircle_generator()).unwrap();
        let v = inv.flow_ode(c(0.0, 3.0), 1.0).unwrap();
        assert!((v - c(0.0, 11f64.sqrt())).norm() < 1e-6, "{v}");
    }

    #[test]
    fn inverse_examples() {
        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        assert!((k.flow_inverse(c(0.0, 3.0), 2.0).unwrap() - Complex64::i()).norm() < 1e-14);
        let ff = neg_sqrt2();
        assert!((ff.flow_inverse(c(1.5, 2.0), 1.0).unwrap() - Complex64::i()).norm() < 1e-8);
        assert!(matches!(k.flow_inverse(c(0.0, 1.0), 2.0), Err(Error::OutsideImage { .. })));

        let ode = FlowField::new(AnalyticFn::neg_pow(0.5)).unwrap();
        let z = c(0.4, 0.9);
        let w = ode.flow_ode(z, 0.7).unwrap();
        assert!((ode.flow_inverse(w, 0.7).unwrap() - z).norm() < 1e-7);
    }

    #[test]
    fn negpow_factorization_matches_ode() {
        let ff = FlowField::neg_pow(1.0 / 3.0).unwrap();
        assert!(ff.has_closed_route());
        for z in [c(0.5, 0.5), c(-1.0, 2.0)] {
            let a = ff.flow_conformal(z, 0.8).unwrap();
            let b = ff.flow_ode(z, 0.8).unwrap();
            assert!((a - b).norm() < 1e-6, "{a} vs {b}");
        }
        assert!(!FlowField::neg_pow(0.75).unwrap().has_closed_route());
    }

    #[test]
    fn fal2_examples() {
        let opts = Fal2Options {
            plan_radii: 16,
            plan_angles: 16,
            ..Fal2Options::default()
        };
        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        assert!(fal2_check(&k, &opts).unwrap().is_pass());
        let ff = build_fal2(PsiForm::power(0.5).unwrap()).unwrap();
        assert!(fal2_check(&ff, &opts).unwrap().is_pass());
        let bad = FlowField::new(AnalyticFn::pow(-0.5)).unwrap();
        let v = fal2_check(&bad, &opts).unwrap();
        assert!(v.is_fail(), "{v:?}");
    }

    #[test]
    fn marginal_examples() {
        let grid = [0.0];
        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        let m = marginal_law(&k, 1.0, &grid, 1e-3).unwrap();
        assert!((m.density[0] - 1.0 / PI).abs() < 1e-4);

        let ff = neg_sqrt2();
        let m = marginal_law(&ff, 1.0, &[-2.0], 1e-3).unwrap();
        assert!((m.density[0] - 0.32 / PI).abs() < 1e-4, "{}", m.density[0]);

        // grid avoids the atom at 0
        let xs: Vec<f64> = (0..400).map(|j| -3.99 + 0.02 * j as f64).collect();
        let m = marginal_law(&ff, 0.0, &xs, 1e-3).unwrap();
        assert!(m.density.iter().zip(&xs).filter(|(_, x)| x.abs() > 0.2).all(|(d, _)| d.abs() < 1e-5));
        assert!((m.mass_deficit - 1.0).abs() < 0.02);
    }

    #[test]
    fn kernel_examples() {
        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        let s = transition_kernel(&k, 0.5, 1.3, &[1.3], 1e-3).unwrap();
        assert!((s.density[0] - 1.0 / (PI * 0.5)).abs() < 1e-4);

        let xs: Vec<f64> = (0..400).map(|j| -3.29 + 0.02 * j as f64).collect();
        let s = transition_kernel(&k, 0.0, 0.7, &xs, 1e-3).unwrap();
        assert!((s.mass_deficit - 1.0).abs() < 0.02);

        let ff = neg_sqrt2();
        let a = transition_kernel(&ff, 1.0, 0.0, &xs, 1e-3).unwrap();
        let b = marginal_law(&ff, 1.0, &xs, 1e-3).unwrap();
        assert!(a.density.iter().zip(&b.density).all(|(p, q)| (p - q).abs() <= 1e-8));
    }

    #[test]
    fn increment_examples() {
        let z = c(0.3, 2.0);
        let k = build_fal2_constant(c(0.0, -1.0)).unwrap();
        let high = c(0.3, 3.0);
        assert!((increment_transform(&k, 0.5, 2.0, high).unwrap() - c(0.0, -1.5)).norm() < 1e-12);
        let ff = neg_sqrt2();
        let (s, t) = (0.3, 1.1);
        let exact = -(2.0 * z).sqrt() * (t - s) + (t * t - s * s) / 2.0;
        assert!((increment_transform(&ff, s, t, z).unwrap() - exact).norm() < 1e-8);
        assert_eq!(increment_transform(&ff, 0.7, 0.7, z).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn closed_form_oracle() {
        let ff = neg_sqrt2();
        let z = c(-0.7, 0.4);
        assert!((ff.flow(z, 2.0).unwrap() - closed(z, 2.0)).norm() < 1e-8);
    }
}
