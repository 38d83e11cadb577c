//! Finite positive measures on the real line: atoms plus absolutely
//! continuous pieces, with moment and integration services.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub position: f64,
    pub mass: f64,
}

/// Density evaluators. Builtins carry their natural support; evaluation
/// outside it returns 0.
#[derive(Clone)]
pub enum Density {
    /// `sqrt(4t - u^2) / (2 pi t)`, the semicircle law of variance `t`.
    Semicircle { t: f64 },
    /// `sqrt(-u) / (2 pi (1 + u^2))` on `u < 0`.
    SqrtNeg,
    /// `1 / (2 pi sqrt(-u) (1 + u^2))` on `u < 0`.
    InvSqrtNeg,
    /// `scale / (pi (scale^2 + u^2))`.
    Cauchy { scale: f64 },
    /// Linear interpolation of `(u, value)` pairs sorted by `u`; 0 outside.
    Table(Vec<(f64, f64)>),
    Custom {
        label: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl Density {
    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Density::Custom {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Density::Semicircle { t } => format!("semicircle({t})"),
            Density::SqrtNeg => "sqrtNeg".into(),
            Density::InvSqrtNeg => "invSqrtNeg".into(),
            Density::Cauchy { scale } => format!("cauchy({scale})"),
            Density::Table(_) => "table".into(),
            Density::Custom { label, .. } => label.clone(),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Density::Semicircle { t } => {
                let r = 4.0 * t - u * u;
                if r <= 0.0 {
                    0.0
                } else {
                    r.sqrt() / (2.0 * PI * t)
                }
            }
            Density::SqrtNeg => {
                if u < 0.0 {
                    (-u).sqrt() / (2.0 * PI * (1.0 + u * u))
                } else {
                    0.0
                }
            }
            Density::InvSqrtNeg => {
                if u < 0.0 {
                    1.0 / (2.0 * PI * (-u).sqrt() * (1.0 + u * u))
                } else {
                    0.0
                }
            }
            Density::Cauchy { scale } => scale / (PI * (scale * scale + u * u)),
            Density::Table(rows) => interpolate(rows, u),
            Density::Custom { f, .. } => f(u),
        }
    }
}

fn interpolate(rows: &[(f64, f64)], u: f64) -> f64 {
    if rows.is_empty() || u < rows[0].0 || u > rows[rows.len() - 1].0 {
        return 0.0;
    }
    let k = rows.partition_point(|r| r.0 <= u);
    if k == 0 {
        return rows[0].1;
    }
    if k >= rows.len() {
        return rows[rows.len() - 1].1;
    }
    let (x0, y0) = rows[k - 1];
    let (x1, y1) = rows[k];
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (u - x0) / (x1 - x0)
}

/// One absolutely continuous piece: `weight * density` restricted to `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct AcPiece {
    pub lo: f64,
    pub hi: f64,
    pub density: Density,
    pub weight: f64,
    /// Density decays like `|u|^(-tail_exponent)` on unbounded sides.
    pub tail_exponent: Option<f64>,
}

impl AcPiece {
    pub fn new(lo: f64, hi: f64, density: Density) -> Self {
        Self {
            lo,
            hi,
            density,
            weight: 1.0,
            tail_exponent: None,
        }
    }

    pub fn with_tail(mut self, exponent: f64) -> Self {
        self.tail_exponent = Some(exponent);
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    fn value(&self, u: f64) -> f64 {
        self.weight * self.density.eval(u)
    }
}

/// Value in `[-inf, +inf]`.
pub type ExtReal = f64;

/// Serializes an [`ExtReal`] as a number, `"inf"`/`"-inf"`, or `null` for NaN.
pub fn serialize_ext_real<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_none()
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone)]
pub struct Measure {
    atoms: Vec<Atom>,
    pieces: Vec<AcPiece>,
    quad: QuadConfig,
}

impl Default for Measure {
    fn default() -> Self {
        Self::empty()
    }
}

impl Measure {
    pub fn new(mut atoms: Vec<Atom>, pieces: Vec<AcPiece>) -> Result<Self> {
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass.is_finite() && a.position.is_finite()) {
                return Err(Error::InvalidMeasure(format!("bad atom {a:?}")));
            }
        }
        atoms.sort_by(|a, b| a.position.total_cmp(&b.position));
        if atoms.windows(2).any(|w| w[0].position == w[1].position) {
            return Err(Error::InvalidMeasure("atom positions must be distinct".into()));
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.lo < p.hi) || p.lo.is_nan() || p.hi.is_nan() {
                return Err(Error::InvalidMeasure(format!("piece {k}: need lo < hi")));
            }
            if !(p.weight > 0.0 && p.weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!("piece {k}: weight must be positive")));
            }
            if let Some(e) = p.tail_exponent {
                if !p.is_bounded() && e <= 1.0 {
                    return Err(Error::InvalidMeasure(format!(
                        "piece {k}: tail exponent {e} gives infinite mass"
                    )));
                }
            }
            if let Density::Table(rows) = &p.density {
                if rows.windows(2).any(|w| w[1].0 < w[0].0) {
                    return Err(Error::InvalidMeasure(format!("piece {k}: table must be sorted")));
                }
            }
            let (a, b) = (clip_finite(p.lo, p.hi, true), clip_finite(p.lo, p.hi, false));
            for i in 0..=64 {
                let u = a + (b - a) * (i as f64 + 0.5) / 65.0;
                let v = p.density.eval(u);
                if !(v >= 0.0) {
                    return Err(Error::InvalidMeasure(format!(
                        "piece {k}: density {v} at u = {u} is negative or NaN"
                    )));
                }
            }
        }
        Ok(Self {
            atoms,
            pieces,
            quad: QuadConfig::default(),
        })
    }

    pub fn empty() -> Self {
        Self {
            atoms: Vec::new(),
            pieces: Vec::new(),
            quad: QuadConfig::default(),
        }
    }

    pub fn dirac(position: f64) -> Self {
        Self::new(vec![Atom { position, mass: 1.0 }], vec![]).expect("valid atom")
    }

    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            atoms.iter().map(|&(position, mass)| Atom { position, mass }).collect(),
            vec![],
        )
    }

    /// Semicircle law of variance `t`.
    pub fn semicircle(t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidMeasure("semicircle variance must be positive".into()));
        }
        let r = 2.0 * t.sqrt();
        Self::new(vec![], vec![AcPiece::new(-r, r, Density::Semicircle { t })])
    }

    /// Cauchy law of the given scale centred at 0.
    pub fn cauchy(scale: f64) -> Result<Self> {
        Self::new(
            vec![],
            vec![AcPiece::new(f64::NEG_INFINITY, f64::INFINITY, Density::Cauchy { scale }).with_tail(2.0)],
        )
    }

    pub fn with_quadrature(mut self, quad: QuadConfig) -> Self {
        self.quad = quad;
        self
    }

    pub fn quadrature(&self) -> &QuadConfig {
        &self.quad
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[AcPiece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.pieces.is_empty()
    }

    /// Multiplies every mass and density weight by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidMeasure("scale factor must be positive".into()));
        }
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.mass *= c;
        }
        for p in &mut out.pieces {
            p.weight *= c;
        }
        Ok(out)
    }

    /// Disjoint union; atoms at a common position are merged.
    pub fn union(&self, other: &Measure) -> Result<Self> {
        let mut atoms = self.atoms.clone();
        for a in &other.atoms {
            match atoms.iter_mut().find(|b| b.position == a.position) {
                Some(b) => b.mass += a.mass,
                None => atoms.push(*a),
            }
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Ok(Self::new(atoms, pieces)?.with_quadrature(self.quad))
    }

    /// `∫ f dm` over atoms and density pieces. `breaks` are hints for the
    /// initial partition (near-singularities of `f`).
    pub fn integrate<F>(&self, f: F, breaks: &[f64]) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut acc: Complex64 = self.atoms.iter().map(|a| f(a.position) * a.mass).sum();
        for p in &self.pieces {
            acc += self.integrate_piece(p, &f, p.lo, p.hi, breaks)?;
        }
        Ok(acc)
    }

    fn integrate_piece<F>(&self, p: &AcPiece, f: &F, lo: f64, hi: f64, breaks: &[f64]) -> Result<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        if !(lo < hi) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut cuts: Vec<f64> = breaks.to_vec();
        if lo.is_finite() && hi.is_finite() {
            for i in 1..8 {
                cuts.push(lo + (hi - lo) * i as f64 / 8.0);
            }
        }
        if let Density::Table(rows) = &p.density {
            cuts.extend(rows.iter().map(|r| r.0));
        }
        quadrature::integrate(|u| f(u) * p.value(u), lo, hi, &cuts, &self.quad)
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.integrate(|_| Complex64::new(1.0, 0.0), &[]).map(|c| c.re)
    }

    /// `∫ u^k dm` for `k ∈ {0, 1, 2}`, optionally restricted to `u > 0`.
    ///
    /// Divergence is decided from the tail exponents: a side decaying like
    /// `|u|^(-p)` has a finite `k`-th moment iff `p - k > 1`.
    pub fn moment(&self, k: u32, positive_part_only: bool) -> Result<ExtReal> {
        if k > 2 {
            return Err(Error::Invalid(format!("moment order {k} not supported")));
        }
        let keep = |u: f64| !positive_part_only || u > 0.0;
        let mut finite = self
            .atoms
            .iter()
            .filter(|a| keep(a.position))
            .map(|a| a.mass * a.position.powi(k as i32))
            .sum::<f64>();
        let (mut plus_inf, mut minus_inf) = (false, false);

        for (idx, p) in self.pieces.iter().enumerate() {
            let lo = if positive_part_only { p.lo.max(0.0) } else { p.lo };
            let hi = p.hi;
            if !(lo < hi) {
                continue;
            }
            let unbounded_left = !lo.is_finite();
            let unbounded_right = !hi.is_finite();
            if k > 0 && (unbounded_left || unbounded_right) {
                let e = p.tail_exponent.ok_or(Error::MissingTailMetadata { piece: idx })?;
                if e - k as f64 <= 1.0 {
                    if unbounded_right {
                        plus_inf = true;
                    }
                    if unbounded_left {
                        if k % 2 == 0 {
                            plus_inf = true;
                        } else {
                            minus_inf = true;
                        }
                    }
                    continue;
                }
            }
            let v = self.integrate_piece(p, &|u: f64| Complex64::new(u.powi(k as i32), 0.0), lo, hi, &[])?;
            finite += v.re;
        }
        match (plus_inf, minus_inf) {
            (true, true) => Err(Error::IndeterminateMoment),
            (true, false) => Ok(f64::INFINITY),
            (false, true) => Ok(f64::NEG_INFINITY),
            (false, false) => Ok(finite),
        }
    }
}

fn clip_finite(lo: f64, hi: f64, left: bool) -> f64 {
    let a = if lo.is_finite() { lo } else if hi.is_finite() { hi - 100.0 } else { -100.0 };
    let b = if hi.is_finite() { hi } else { a + 100.0 };
    if left {
        a
    } else {
        b
    }
}
