//! Spectral gaps of stochastic energy exchange models.
//!
//! Numerical kernels are generic over [`scalar::Real`]; `f64` is the default
//! and [`Ext`] (double-double) is used where monomial Gram matrices become
//! too ill-conditioned for `f64`.

pub mod appendix;
pub mod bounds;
pub mod error;
pub mod ext;
pub mod galerkin;
pub mod linalg;
pub mod measures;
pub mod models;
pub mod quadrature;
pub mod report;
pub mod scalar;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};

/// Double-double scalar with about 32 significant digits.
pub type Ext = ext::DoubleDouble;
