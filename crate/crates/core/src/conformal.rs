//! Primitives `Ψ` of `−ψ` for Nevanlinna `ψ`: univalent maps of `C+` onto
//! domains starlike at `−∞`, their slit images, the half-plane containment
//! criterion and numeric inversion `Φ = Ψ^-1`.

use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{AcPiece, Density, Measure};
use crate::nevanlinna::{NevanlinnaSpec, RationalNevanlinna};
use crate::newton::{self, NewtonOptions};
use crate::quadrature::pole_breaks;

const CACHE_CAP: usize = 4096;

/// The Nevanlinna function `ψ` behind a primitive.
#[derive(Debug, Clone)]
pub enum PsiForm {
    Rational(RationalNevanlinna),
    /// `ψ(z) = −z^σ`, `0 < σ ≤ 1`, principal branch.
    Power { sigma: f64 },
    Spec(NevanlinnaSpec),
}

impl PsiForm {
    pub fn power(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::Invalid(format!("power form needs 0 < sigma <= 1, got {sigma}")));
        }
        Ok(PsiForm::Power { sigma })
    }

    pub fn label(&self) -> String {
        match self {
            PsiForm::Rational(r) => format!(
                "rational(a={},b={},poles={:?},residues={:?})",
                r.a, r.b, r.poles, r.residues
            ),
            PsiForm::Power { sigma } => format!("negPow({sigma})"),
            PsiForm::Spec(s) => format!("spec(alpha={},beta={})", s.alpha, s.beta),
        }
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        match self {
            PsiForm::Rational(r) => Ok(r.eval(z)),
            PsiForm::Power { sigma } => Ok(-z.powf(*sigma)),
            PsiForm::Spec(s) => s.eval(z),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        match self {
            PsiForm::Rational(r) => Ok(r.derivative(z)),
            PsiForm::Power { sigma } => Ok(-*sigma * z.powf(sigma - 1.0)),
            PsiForm::Spec(s) => s.derivative(z),
        }
    }

    /// Canonical triple `(α, β, ν)`.
    pub fn canonical(&self) -> Result<NevanlinnaSpec> {
        match self {
            PsiForm::Rational(r) => r.to_canonical(),
            PsiForm::Spec(s) => Ok(s.clone()),
            PsiForm::Power { sigma } => {
                let sigma = *sigma;
                if sigma == 1.0 {
                    return NevanlinnaSpec::new(-1.0, 0.0, Measure::empty());
                }
                // −Im(−(u + i0)^σ) = |u|^σ sin(πσ) on u < 0.
                let s = (PI * sigma).sin();
                let density = Density::custom(format!("negPowNu({sigma})"), move |u: f64| {
                    if u < 0.0 {
                        (-u).powf(sigma) * s / (PI * (1.0 + u * u))
                    } else {
                        0.0
                    }
                });
                let nu = Measure::new(
                    vec![],
                    vec![AcPiece::new(f64::NEG_INFINITY, 0.0, density).with_tail(2.0 - sigma)],
                )?;
                NevanlinnaSpec::new(0.0, -(PI * sigma / 2.0).cos(), nu)
            }
        }
    }
}

/// `log(1 + w) − w`.
fn log1p_minus_id(w: Complex64) -> Complex64 {
    if w.norm() < 0.25 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut p = w;
        for k in 2..48 {
            p *= w;
            let term = p / k as f64;
            if k % 2 == 0 {
                acc -= term;
            } else {
                acc += term;
            }
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        acc
    } else {
        (1.0 + w).ln() - w
    }
}

/// Unshifted primitive.
fn primitive_raw(form: &PsiForm, z: Complex64) -> Result<Complex64> {
    match form {
        PsiForm::Rational(r) => {
            if z.im < 0.0 {
                return Err(Error::Domain(format!("primitive needs Im z >= 0, got {z}")));
            }
            let mut v = -z * z * (r.a / 2.0) - z * r.b;
            for (xi, al) in r.poles.iter().zip(&r.residues) {
                let d = z - xi;
                if d.norm() < 1e-9 {
                    return Err(Error::PoleOnPath { pole: *xi });
                }
                v -= d.ln() * *al;
            }
            Ok(v)
        }
        PsiForm::Power { sigma } => {
            if z.im < 0.0 {
                return Err(Error::Domain(format!("primitive needs Im z >= 0, got {z}")));
            }
            Ok(z.powf(sigma + 1.0) / (sigma + 1.0))
        }
        PsiForm::Spec(s) => {
            if !(z.im > 0.0) {
                return Err(Error::Domain(format!("primitive needs Im z > 0, got {z}")));
            }
            let i = Complex64::i();
            let dz = z - i;
            let mass = s.nu.total_mass()?;
            let integral = s.nu.integrate(
                |u| log1p_minus_id(dz / (i - u)) * (1.0 + u * u),
                &pole_breaks(z),
            )?;
            Ok(-(z * z + 1.0) * (s.alpha / 2.0) - dz * s.beta + i * dz * mass - integral)
        }
    }
}

/// Horizontal half-line `{p + iq : p ≥ tip}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slit {
    pub height: f64,
    pub tip: f64,
    /// The critical point `x*` with `ψ(x*) = 0` whose image is the tip.
    pub root: f64,
}

/// `Ψ(C+)` for rational `ψ` with `a < 0`: the plane minus `N + 1` slits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlitImage {
    /// One slit per real interval between consecutive poles, in increasing height.
    pub slits: Vec<Slit>,
}

impl SlitImage {
    /// `d_Ω(y) = sup {x : x + iy ∈ Ω}` (for a slit domain, `+∞` off the slits).
    pub fn d_omega(&self, y: f64) -> f64 {
        self.slits
            .iter()
            .find(|s| s.height == y)
            .map(|s| s.tip)
            .unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, w: Complex64) -> bool {
        w.re < self.d_omega(w.im)
    }

    /// Distance from `w` to the nearest slit.
    pub fn distance(&self, w: Complex64) -> f64 {
        self.slits
            .iter()
            .map(|s| {
                let dx = (s.tip - w.re).max(0.0);
                (dx * dx + (w.im - s.height).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Root of the strictly decreasing `f` on `(lo, hi)`; infinite ends are
/// pushed outwards until the sign brackets the root.
fn bisect_decreasing(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let width = 1.0;
    let (mut a, mut b) = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (false, true) => {
            let mut d = width;
            while f(hi - d) <= 0.0 && d < 1e300 {
                d *= 2.0;
            }
            (hi - d, hi)
        }
        (true, false) => {
            let mut d = width;
            while f(lo + d) >= 0.0 && d < 1e300 {
                d *= 2.0;
            }
            (lo, lo + d)
        }
        (false, false) => {
            let mut d = width;
            while (f(-d) <= 0.0 || f(d) >= 0.0) && d < 1e300 {
                d *= 2.0;
            }
            (-d, d)
        }
    };
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || (b - a) <= 1e-12 * m.abs().max(1.0) * 1e-3 {
            break;
        }
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Slits of `Ψ(C+)` for rational `ψ` with `a < 0`.
pub fn slit_image(r: &RationalNevanlinna) -> Result<SlitImage> {
    r.validate()?;
    if !(r.a < 0.0) {
        return Err(Error::Invalid(
            "slit image needs a < 0; trace the boundary for a = 0".into(),
        ));
    }
    let n = r.poles.len();
    let psi = |x: f64| {
        let mut v = r.a * x + r.b;
        for (xi, al) in r.poles.iter().zip(&r.residues) {
            v += al / (x - xi);
        }
        v
    };
    let mut slits = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let lo = if j == 0 { f64::NEG_INFINITY } else { r.poles[j - 1] };
        let hi = if j == n { f64::INFINITY } else { r.poles[j] };
        let height = -PI * r.residues[j..].iter().sum::<f64>();
        let root = bisect_decreasing(psi, lo, hi);
        let mut tip = -r.a * root * root / 2.0 - r.b * root;
        for (xi, al) in r.poles.iter().zip(&r.residues) {
            tip -= al * (root - xi).abs().ln();
        }
        slits.push(Slit { height, tip, root });
    }
    Ok(SlitImage { slits })
}

/// Decisive quantities of the half-plane containment criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Containment {
    pub contains: bool,
    pub alpha: f64,
    /// `∫_0^∞ u² ν(du)`, possibly `+∞`.
    #[serde(serialize_with = "crate::measure::serialize_ext_real")]
    pub positive_second_moment: f64,
    /// `β + ∫ u ν(du)`, possibly `±∞`; `NaN` when not needed.
    #[serde(serialize_with = "crate::measure::serialize_ext_real")]
    pub drift: f64,
}

/// Threshold below which a finite drift counts as negative.
pub const DRIFT_TOL: f64 = 1e-8;

/// Does `Ψ(C+)` contain a translate of the upper half-plane?
pub fn contains_halfplane_translate(psi: &NevanlinnaSpec) -> Result<Containment> {
    let m2 = psi.nu.moment(2, true)?;
    let mut out = Containment {
        contains: false,
        alpha: psi.alpha,
        positive_second_moment: m2,
        drift: f64::NAN,
    };
    if m2.is_infinite() {
        return Ok(out);
    }
    let drift = psi.beta + psi.nu.moment(1, false)?;
    out.drift = drift;
    out.contains = psi.alpha < 0.0 || drift < -DRIFT_TOL;
    Ok(out)
}

/// `Ψ` with derivative `−ψ`, a normalizing shift, and a numeric inverse.
#[derive(Debug, Clone)]
pub struct ConformalPair {
    form: PsiForm,
    shift: Complex64,
    cache: Arc<RwLock<Vec<(Complex64, Complex64)>>>,
}

impl ConformalPair {
    pub fn new(form: PsiForm) -> Result<Self> {
        match &form {
            PsiForm::Rational(r) => r.validate()?,
            PsiForm::Power { sigma } => {
                PsiForm::power(*sigma)?;
            }
            PsiForm::Spec(_) => {}
        }
        Ok(Self {
            form,
            shift: Complex64::new(0.0, 0.0),
            cache: Arc::new(RwLock::new(Vec::new())),
        })
    }

    pub fn form(&self) -> &PsiForm {
        &self.form
    }

    pub fn shift(&self) -> Complex64 {
        self.shift
    }

    /// Same map translated by `c`; starts with an empty cache.
    pub fn with_shift(&self, c: Complex64) -> Self {
        Self {
            form: self.form.clone(),
            shift: c,
            cache: Arc::new(RwLock::new(Vec::new())),
        }
    }

    pub fn psi(&self, z: Complex64) -> Result<Complex64> {
        self.form.eval(z)
    }

    /// `Ψ(z)` including the normalizing shift.
    pub fn primitive(&self, z: Complex64) -> Result<Complex64> {
        Ok(primitive_raw(&self.form, z)? + self.shift)
    }

    /// `Ψ'(z) = −ψ(z)`.
    pub fn primitive_prime(&self, z: Complex64) -> Result<Complex64> {
        Ok(-self.form.eval(z)?)
    }

    pub fn containment(&self) -> Result<Containment> {
        contains_halfplane_translate(&self.form.canonical()?)
    }

    /// Translate so that `Ψ(C+) ⊇ C+`. The shift is `−i` times the supremum
    /// of `Im Ψ` along the boundary, sampled on a log ladder in `|x|`, and
    /// is then checked by inverting a probe grid.
    pub fn normalize(&self) -> Result<Self> {
        let cert = self.containment()?;
        if !cert.contains {
            return Err(Error::NotContaining);
        }
        let shift = match &self.form {
            // slits sit at heights <= 0 and the sector contains C+
            PsiForm::Rational(_) | PsiForm::Power { .. } => Complex64::new(0.0, 0.0),
            PsiForm::Spec(_) => {
                let mut sup = f64::NEG_INFINITY;
                for k in -40..=12 {
                    let r = 10f64.powf(k as f64 / 4.0);
                    for x in [-r, r] {
                        let v = primitive_raw(&self.form, Complex64::new(x, 1e-12 * r.max(1.0)))?;
                        sup = sup.max(v.im);
                    }
                }
                Complex64::new(0.0, -sup)
            }
        };
        let pair = self.with_shift(shift);
        for y in [1e-2, 1.0, 1e2] {
            for x in [-1e2, -1.0, 0.0, 1.0, 1e2] {
                pair.invert(Complex64::new(x, y))?;
            }
        }
        Ok(pair)
    }

    fn newton_from(&self, w: Complex64, seed: Complex64) -> Result<Complex64> {
        let opts = NewtonOptions {
            residual_tol: 1e-9 * w.norm().max(1.0),
            ..NewtonOptions::default()
        };
        newton::solve(
            |z| match (self.primitive(z), self.primitive_prime(z)) {
                (Ok(v), Ok(d)) => (v - w, d),
                _ => (Complex64::new(f64::NAN, 0.0), Complex64::new(f64::NAN, 0.0)),
            },
            seed,
            &opts,
        )
    }

    /// Tracks the preimage along the polyline `waypoints`, starting from the
    /// known pair `(waypoints[0], z0)`.
    fn continuation(&self, waypoints: &[Complex64], z0: Complex64) -> Result<Complex64> {
        let mut z = z0;
        for seg in waypoints.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let mut s: f64 = 0.0;
            let mut h: f64 = 0.125;
            while s < 1.0 {
                let next = (s + h).min(1.0);
                match self.newton_from(a + (b - a) * next, z) {
                    Ok(v) => {
                        z = v;
                        s = next;
                        h = (h * 2.0).min(0.125);
                    }
                    Err(e) => {
                        h *= 0.5;
                        if h < 1e-7 {
                            return Err(e);
                        }
                    }
                }
            }
        }
        Ok(z)
    }

    /// `Φ(w) = Ψ^-1(w) ∈ C+`.
    pub fn invert(&self, w: Complex64) -> Result<Complex64> {
        let outside = Error::OutsideImage { w };
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(outside);
        }
        let cached = {
            let cache = self.cache.read().expect("cache lock");
            cache
                .iter()
                .min_by(|p, q| (p.0 - w).norm().total_cmp(&(q.0 - w).norm()))
                .copied()
        };
        let mut seeds = Vec::new();
        if let Some((_, z)) = cached {
            seeds.push(z);
        }
        if let PsiForm::Power { sigma } = self.form {
            let g = ((w - self.shift) * (sigma + 1.0)).powf(1.0 / (sigma + 1.0));
            if g.im > 0.0 {
                seeds.push(g);
            }
        }
        seeds.push(Complex64::i());
        let mut found = seeds.iter().find_map(|&s| self.newton_from(w, s).ok());

        if found.is_none() {
            let i = Complex64::i();
            let w0 = self.primitive(i)?;
            found = self.continuation(&[w0, w], i).ok();
            if found.is_none() {
                let reach = 2.0 * (w0.norm() + w.norm() + 1.0);
                let left = w0.re.min(w.re) - reach;
                let path = [w0, Complex64::new(left, w0.im), Complex64::new(left, w.im), w];
                found = self.continuation(&path, i).ok();
            }
        }
        let z = found.ok_or(outside)?;
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() < CACHE_CAP {
            cache.push((w, z));
        }
        Ok(z)
    }

    /// Largest violation of `Im((Ψ(z2) − Ψ(z1)) / (z2 − z1)) ≥ 0` over the
    /// given pairs (`0` when none).
    pub fn univalence_defect(&self, pairs: &[(Complex64, Complex64)]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(z1, z2) in pairs {
            if z1 == z2 {
                continue;
            }
            let q = (self.primitive(z2)? - self.primitive(z1)?) / (z2 - z1);
            worst = worst.max(-q.im);
        }
        Ok(worst)
    }
}

/// Image of a line under `Ψ`.
#[derive(Debug, Clone, Serialize)]
pub struct Polyline {
    /// `"im"` for `Im z = value`, `"re"` for `Re z = value`.
    pub family: &'static str,
    pub value: f64,
    pub points: Vec<[f64; 4]>,
}

/// Images under `Ψ` of horizontal lines `Im z = y` (for `x ∈ [−re_max, re_max]`)
/// and vertical lines `Re z = x` (for `y ∈ (0, im_max]`).
pub fn flowlines(pair: &ConformalPair, im_lines: usize, re_lines: usize, re_max: f64, im_max: f64, samples: usize) -> Result<Vec<Polyline>> {
    let mut out = Vec::new();
    let samples = samples.max(2);
    for k in 0..im_lines {
        // geometric heights so that the lowest lines hug the slits
        let frac = if im_lines > 1 { k as f64 / (im_lines - 1) as f64 } else { 0.0 };
        let y = im_max * 10f64.powf(-3.0 * (1.0 - frac));
        let mut pts = Vec::with_capacity(samples);
        for j in 0..samples {
            let x = -re_max + 2.0 * re_max * j as f64 / (samples - 1) as f64;
            let z = Complex64::new(x, y);
            let w = pair.primitive(z)?;
            pts.push([z.re, z.im, w.re, w.im]);
        }
        out.push(Polyline { family: "im", value: y, points: pts });
    }
    for k in 0..re_lines {
        let x = if re_lines > 1 {
            -re_max + 2.0 * re_max * k as f64 / (re_lines - 1) as f64
        } else {
            0.0
        };
        let mut pts = Vec::with_capacity(samples);
        for j in 0..samples {
            let y = im_max * 10f64.powf(-3.0 + 3.0 * j as f64 / (samples - 1) as f64);
            let z = Complex64::new(x, y);
            let w = pair.primitive(z)?;
            pts.push([z.re, z.im, w.re, w.im]);
        }
        out.push(Polyline { family: "re", value: x, points: pts });
    }
    Ok(out)
}

/// `Ψ(x + iδ)` for `x` on a uniform grid; points within `δ` of a pole are skipped.
pub fn boundary_trace(pair: &ConformalPair, lo: f64, hi: f64, n: usize, delta: f64) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let x = lo + (hi - lo) * j as f64 / (n.max(2) - 1) as f64;
        match pair.primitive(Complex64::new(x, delta)) {
            Ok(w) => out.push([x, w.re, w.im]),
            Err(Error::PoleOnPath { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
