//! Nevanlinna functions: analytic maps of the upper half-plane into the
//! closed lower half-plane.
//!
//! Canonical form: `φ(z) = αz + β + ∫ (1 + uz)/(z − u) ν(du)` with `α ≤ 0`
//! and `ν` a finite positive measure. Rational form:
//! `ψ(z) = az + b + Σ α_k / (z − ξ_k)` with `a ≤ 0`, `α_k > 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{AnalyticFn, DomainTag};
use crate::error::{Error, Result};
use crate::measure::{AcPiece, Atom, Density, Measure};
use crate::quadrature::{pole_breaks, trapezoid};

#[derive(Debug, Clone)]
pub struct NevanlinnaSpec {
    pub alpha: f64,
    pub beta: f64,
    pub nu: Measure,
}

impl NevanlinnaSpec {
    pub fn new(alpha: f64, beta: f64, nu: Measure) -> Result<Self> {
        if !(alpha <= 0.0) || !beta.is_finite() || !alpha.is_finite() {
            return Err(Error::Invalid(format!("need alpha <= 0 and finite beta, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta, nu })
    }

    /// `-z^(1/2)`: `α = 0`, `β = -1/√2`, `ν(du) = √(-u) / (π(1 + u²)) du` on `u < 0`.
    pub fn neg_sqrt() -> Self {
        let nu = Measure::new(
            vec![],
            vec![AcPiece::new(f64::NEG_INFINITY, 0.0, Density::SqrtNeg)
                .with_tail(1.5)
                .with_weight(2.0)],
        )
        .expect("valid measure");
        Self::new(0.0, -std::f64::consts::FRAC_1_SQRT_2, nu).expect("valid spec")
    }

    /// `z^(-1/2)`: `α = 0`, `β = 1/√2`, `ν(du) = du / (π √(-u) (1 + u²))` on `u < 0`.
    pub fn inv_sqrt() -> Self {
        let nu = Measure::new(
            vec![],
            vec![AcPiece::new(f64::NEG_INFINITY, 0.0, Density::InvSqrtNeg)
                .with_tail(2.5)
                .with_weight(2.0)],
        )
        .expect("valid measure");
        Self::new(0.0, std::f64::consts::FRAC_1_SQRT_2, nu).expect("valid spec")
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("Nevanlinna evaluation needs Im z > 0, got {z}")));
        }
        let integral = self
            .nu
            .integrate(|u| (1.0 + z * u) / (z - u), &pole_breaks(z))?;
        Ok(z * self.alpha + self.beta + integral)
    }

    /// `φ'(z) = α − ∫ (1 + u²)/(z − u)² ν(du)`.
    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        let integral = self
            .nu
            .integrate(|u| (1.0 + u * u) / ((z - u) * (z - u)), &pole_breaks(z))?;
        Ok(Complex64::new(self.alpha, 0.0) - integral)
    }

    pub fn to_analytic(&self) -> AnalyticFn {
        let a = self.clone();
        let d = self.clone();
        AnalyticFn::new("nevanlinna", DomainTag::UpperHalfPlane, move |z| {
            a.eval(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN))
        })
        .with_derivative(move |z| d.derivative(z).unwrap_or(Complex64::new(f64::NAN, f64::NAN)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalNevanlinna {
    pub a: f64,
    pub b: f64,
    pub poles: Vec<f64>,
    pub residues: Vec<f64>,
}

impl RationalNevanlinna {
    pub fn new(a: f64, b: f64, poles: Vec<f64>, residues: Vec<f64>) -> Result<Self> {
        let r = Self { a, b, poles, residues };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a <= 0.0) || !self.b.is_finite() || !self.a.is_finite() {
            return Err(Error::Invalid("rational form needs a <= 0 and finite b".into()));
        }
        if self.poles.len() != self.residues.len() {
            return Err(Error::Invalid("poles and residues differ in length".into()));
        }
        if self.poles.iter().any(|p| !p.is_finite()) || self.poles.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Invalid("poles must be finite and strictly increasing".into()));
        }
        if self.residues.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Invalid("residues must be positive".into()));
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut v = z * self.a + self.b;
        for (xi, r) in self.poles.iter().zip(&self.residues) {
            v += r / (z - xi);
        }
        v
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let mut v = Complex64::new(self.a, 0.0);
        for (xi, r) in self.poles.iter().zip(&self.residues) {
            let d = z - xi;
            v -= r / (d * d);
        }
        v
    }

    pub fn to_analytic(&self) -> AnalyticFn {
        let a = self.clone();
        let d = self.clone();
        AnalyticFn::new(
            format!("rational(a={},b={},poles={:?},residues={:?})", self.a, self.b, self.poles, self.residues),
            DomainTag::UpperHalfPlane,
            move |z| a.eval(z),
        )
        .with_derivative(move |z| d.derivative(z))
    }

    /// Canonical triple: `α = a`, atoms `m_k = α_k / (1 + ξ_k²)` at `ξ_k`,
    /// `β = b − Σ m_k ξ_k`.
    pub fn to_canonical(&self) -> Result<NevanlinnaSpec> {
        self.validate()?;
        let atoms: Vec<Atom> = self
            .poles
            .iter()
            .zip(&self.residues)
            .map(|(&xi, &r)| Atom {
                position: xi,
                mass: r / (1.0 + xi * xi),
            })
            .collect();
        let beta = self.b - atoms.iter().map(|a| a.mass * a.position).sum::<f64>();
        NevanlinnaSpec::new(self.a, beta, Measure::new(atoms, vec![])?)
    }
}

/// Sampling plan and ladders for [`recover_parameters`].
#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub u_grid: Vec<f64>,
    pub eps: f64,
    /// Exponents `k` of the ladder `v = 2^k` used for `α`.
    pub v_exponents: (i32, i32),
    pub ladder_tol: f64,
    pub positivity_tol: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        let n = 4001;
        Self {
            u_grid: (0..n).map(|i| -40.0 + 80.0 * i as f64 / (n - 1) as f64).collect(),
            eps: 1e-3,
            v_exponents: (6, 20),
            ladder_tol: 1e-3,
            positivity_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub alpha: f64,
    pub beta: f64,
    /// Sampled measure: the density table plus power-law tails fitted at
    /// the grid ends when the density has not decayed there.
    pub nu: Measure,
    /// `∫ dν` of the sampled measure.
    pub recovered_mass: f64,
    /// `α − Im f(i)`, the total mass implied by the value at `i`.
    pub implied_mass: f64,
    /// `implied_mass − recovered_mass`: mass the sampler could not resolve.
    pub mass_deficit: f64,
    pub real_constant: bool,
    pub atoms_suspected: bool,
    pub clamped_points: usize,
}

/// Recovers `(α, β, ν)` from boundary and asymptotic values of `f`.
pub fn recover_parameters(f: &AnalyticFn, cfg: &RecoveryConfig) -> Result<Recovery> {
    let i = Complex64::i();
    let fi = f.try_eval(i)?;
    if fi.im > cfg.positivity_tol {
        return Err(Error::NotNevanlinna { z: i, value: fi });
    }
    if fi.im.abs() < 1e-12 {
        return Ok(Recovery {
            alpha: 0.0,
            beta: fi.re,
            nu: Measure::empty(),
            recovered_mass: 0.0,
            implied_mass: 0.0,
            mass_deficit: 0.0,
            real_constant: true,
            atoms_suspected: false,
            clamped_points: 0,
        });
    }

    // α = lim f(iv)/(iv); the error is O(1/v), so pairwise Richardson.
    let (k0, k1) = cfg.v_exponents;
    let mut ratios = Vec::new();
    for k in k0..=k1 {
        let v = 2f64.powi(k);
        let z = Complex64::new(0.0, v);
        let fz = f.try_eval(z)?;
        if fz.im > cfg.positivity_tol * fz.norm().max(1.0) {
            return Err(Error::NotNevanlinna { z, value: fz });
        }
        ratios.push((fz / z).re);
    }
    let extrapolated: Vec<f64> = ratios.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let n = extrapolated.len();
    let spread = (extrapolated[n - 1] - extrapolated[n - 2]).abs();
    if !(spread <= cfg.ladder_tol) {
        return Err(Error::ExtrapolationUnstable { spread });
    }
    let alpha = extrapolated[n - 1].min(0.0);
    let beta = fi.re;
    let implied_mass = alpha - fi.im;

    // ν(du) = lim −Im f(u + iε) / (π(1 + u²)), Richardson in (ε, ε/2).
    let eps = cfg.eps;
    let mut density = Vec::with_capacity(cfg.u_grid.len());
    let mut clamped = 0;
    let mut atoms_suspected = false;
    for &u in &cfg.u_grid {
        let w = 1.0 + u * u;
        let z1 = Complex64::new(u, eps);
        let z2 = Complex64::new(u, eps / 2.0);
        let f1 = f.try_eval(z1)?;
        let f2 = f.try_eval(z2)?;
        for (z, v) in [(z1, f1), (z2, f2)] {
            if v.im > cfg.positivity_tol * v.norm().max(1.0) {
                return Err(Error::NotNevanlinna { z, value: v });
            }
        }
        if eps * (-f2.im) / w > 1e-2 {
            atoms_suspected = true;
        }
        let d1 = -f1.im / (PI * w);
        let d2 = -f2.im / (PI * w);
        let mut d = 2.0 * d2 - d1;
        if d < 0.0 {
            clamped += 1;
            d = 0.0;
        }
        density.push(d);
    }

    let grid = &cfg.u_grid;
    let mut recovered_mass = trapezoid(grid, &density);
    let table: Vec<(f64, f64)> = grid.iter().copied().zip(density.iter().copied()).collect();
    let mut pieces = vec![AcPiece::new(grid[0], grid[grid.len() - 1], Density::Table(table))];

    // Power-law tails from the two outermost samples on each side.
    let m = grid.len();
    if m >= 4 {
        let sides = [
            (grid[0], grid[2], density[0], density[2], true),
            (grid[m - 1], grid[m - 3], density[m - 1], density[m - 3], false),
        ];
        for (edge, inner, d_edge, d_inner, left) in sides {
            if d_edge > 1e-12 && d_inner > d_edge && edge.abs() > inner.abs() && inner.abs() > 0.0 {
                let p = (d_inner / d_edge).ln() / (edge.abs() / inner.abs()).ln();
                if p > 1.0 {
                    let c = d_edge * edge.abs().powf(p);
                    let tail = Density::custom(format!("tail(|u|^-{p})"), move |u: f64| c * u.abs().powf(-p));
                    let piece = if left {
                        AcPiece::new(f64::NEG_INFINITY, edge, tail)
                    } else {
                        AcPiece::new(edge, f64::INFINITY, tail)
                    };
                    recovered_mass += c * edge.abs().powf(1.0 - p) / (p - 1.0);
                    pieces.push(piece.with_tail(p));
                }
            }
        }
    }

    Ok(Recovery {
        alpha,
        beta,
        nu: Measure::new(vec![], pieces)?,
        recovered_mass,
        implied_mass,
        mass_deficit: implied_mass - recovered_mass,
        real_constant: false,
        atoms_suspected,
        clamped_points: clamped,
    })
}

/// Outcome of [`is_nevanlinna_numeric`]. `Pass` certifies only that no
/// violation was found on the sampled points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum NevanlinnaVerdict {
    Pass { points_checked: usize },
    Fail { witness: [f64; 2], im_value: f64 },
    Inconclusive { reason: String },
}

impl NevanlinnaVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, NevanlinnaVerdict::Pass { .. })
    }
}

#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub radii: usize,
    pub angles: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Extra angles `π·10^-k` and `π(1 − 10^-k)` for `k` in `2..=refine_depth`.
    pub refine_depth: i32,
    pub tol: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            radii: 64,
            angles: 64,
            r_min: 1e-3,
            r_max: 1e3,
            refine_depth: 6,
            tol: 1e-9,
        }
    }
}

impl SamplingPlan {
    pub fn coarse() -> Self {
        Self {
            radii: 16,
            angles: 16,
            refine_depth: 4,
            ..Self::default()
        }
    }

    /// Log-polar grid over the upper half-plane, refined towards the real axis.
    pub fn points(&self) -> Vec<Complex64> {
        let mut thetas: Vec<f64> = (0..self.angles)
            .map(|j| PI * (j as f64 + 0.5) / self.angles as f64)
            .collect();
        for k in 2..=self.refine_depth {
            let d = PI * 10f64.powi(-k);
            thetas.push(d);
            thetas.push(PI - d);
        }
        thetas.sort_by(|a, b| a.total_cmp(b));
        let (l0, l1) = (self.r_min.ln(), self.r_max.ln());
        let mut out = Vec::with_capacity(self.radii * thetas.len());
        for i in 0..self.radii {
            let r = (l0 + (l1 - l0) * i as f64 / (self.radii.max(2) - 1) as f64).exp();
            for &t in &thetas {
                out.push(Complex64::from_polar(r, t));
            }
        }
        out
    }
}

/// Samples the upper half-plane looking for a point with `Im f > tol`.
pub fn is_nevanlinna_numeric(f: &AnalyticFn, plan: &SamplingPlan) -> Result<NevanlinnaVerdict> {
    let pts = plan.points();
    for &z in &pts {
        let v = f.try_eval(z)?;
        if v.im > plan.tol {
            return Ok(NevanlinnaVerdict::Fail {
                witness: [z.re, z.im],
                im_value: v.im,
            });
        }
    }
    Ok(NevanlinnaVerdict::Pass {
        points_checked: pts.len(),
    })
}
