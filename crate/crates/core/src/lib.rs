//! Free additive convolution, Nevanlinna functions, conformal primitives and
//! free Lévy flows of the second kind.

pub mod analytic;
pub mod cauchy;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod io;
pub mod levyflow;
pub mod measure;
pub mod nevanlinna;
pub mod newton;
pub mod ode;
pub mod quadrature;

pub use analytic::{AnalyticFn, DomainTag};
pub use error::{Error, Result};
pub use measure::{AcPiece, Atom, Density, Measure};
pub use nevanlinna::{NevanlinnaSpec, RationalNevanlinna};
pub use quadrature::QuadConfig;
