//! Shared numerical utilities: small complex-matrix algebra, truncated power
//! series, sparse complex linear algebra and Krylov solvers, quadrature.

pub mod cmat;
pub mod quad;
pub mod series;
pub mod sparse;

pub use cmat::CMat;
