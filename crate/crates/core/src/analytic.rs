use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// Where an evaluator is known to be analytic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainTag {
    UpperHalfPlane,
    /// The plane minus the closed negative real axis.
    SlitPlane,
    Sector,
}

/// A black-box analytic function with an optional exact derivative.
///
/// Evaluators signal failure with a non-finite value; [`AnalyticFn::try_eval`]
/// turns that into [`Error::EvaluatorFailure`].
#[derive(Clone)]
pub struct AnalyticFn {
    label: String,
    domain: DomainTag,
    f: Evaluator,
    df: Option<Evaluator>,
}

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticFn")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("exact_derivative", &self.df.is_some())
            .finish()
    }
}

impl AnalyticFn {
    pub fn new(
        label: impl Into<String>,
        domain: DomainTag,
        f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            domain,
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn with_derivative(mut self, df: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> DomainTag {
        self.domain
    }

    pub fn has_exact_derivative(&self) -> bool {
        self.df.is_some()
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        (self.f)(z)
    }

    pub fn try_eval(&self, z: Complex64) -> Result<Complex64> {
        let v = self.eval(z);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvaluatorFailure { z })
        }
    }

    /// Exact derivative when supplied, else a central difference along the
    /// real direction (which never leaves a horizontal half-plane).
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match &self.df {
            Some(df) => df(z),
            None => {
                let h = 1e-6 * z.norm().max(1.0);
                (self.eval(z + h) - self.eval(z - h)) / (2.0 * h)
            }
        }
    }

    /// `-z^rho`, principal branch.
    pub fn neg_pow(rho: f64) -> Self {
        Self::new(format!("negPow({rho})"), DomainTag::SlitPlane, move |z| -z.powf(rho))
            .with_derivative(move |z| -rho * z.powf(rho - 1.0))
    }

    /// `z^theta`, principal branch.
    pub fn pow(theta: f64) -> Self {
        Self::new(format!("pow({theta})"), DomainTag::SlitPlane, move |z| z.powf(theta))
            .with_derivative(move |z| theta * z.powf(theta - 1.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(format!("const({},{})", c.re, c.im), DomainTag::UpperHalfPlane, move |_| c)
            .with_derivative(|_| Complex64::new(0.0, 0.0))
    }

    /// Pointwise sum.
    pub fn sum(&self, other: &AnalyticFn) -> Self {
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        let out = Self::new(
            format!("({})+({})", self.label, other.label),
            self.domain,
            move |z| a.eval(z) + b.eval(z),
        );
        if self.has_exact_derivative() && other.has_exact_derivative() {
            out.with_derivative(move |z| da.derivative(z) + db.derivative(z))
        } else {
            out
        }
    }

    /// Pointwise product with a real scalar.
    pub fn scaled(&self, c: f64) -> Self {
        let a = self.clone();
        let da = self.clone();
        let out = Self::new(format!("{c}*({})", self.label), self.domain, move |z| a.eval(z) * c);
        if self.has_exact_derivative() {
            out.with_derivative(move |z| da.derivative(z) * c)
        } else {
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let fs = [AnalyticFn::neg_pow(0.5), AnalyticFn::pow(-0.5), AnalyticFn::neg_pow(1.0 / 3.0)];
        let pts = [Complex64::new(0.3, 0.7), Complex64::new(-2.0, 0.1), Complex64::new(5.0, 3.0)];
        for f in &fs {
            for &z in &pts {
                let h = 1e-5;
                let fd = (f.eval(z + h) - f.eval(z - h)) / (2.0 * h);
                let ex = f.derivative(z);
                assert!((fd - ex).norm() <= 1e-5 * ex.norm().max(1e-3), "{f:?} at {z}");
            }
        }
    }

    #[test]
    fn nonfinite_is_evaluator_failure() {
        let f = AnalyticFn::new("bad", DomainTag::UpperHalfPlane, |_| Complex64::new(f64::NAN, 0.0));
        assert!(matches!(f.try_eval(Complex64::i()), Err(Error::EvaluatorFailure { .. })));
    }
}
