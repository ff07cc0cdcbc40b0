//! Numerical laboratory for unitary connections on cylinders `R x M0` over
//! 2-D transversal surfaces.
//!
//! The crate is organised around a handful of interacting subsystems:
//!
//! - [`geometry`]: transversal surfaces, geodesic flow, exit times, boundary
//!   sphere-bundle sampling, Fermi and polar charts.
//! - [`bundle`]: unitary connections on trivial bundles `M x C^m`, curvature,
//!   gauge actions, parallel transport, holonomy and flat-gauge reconstruction.
//! - [`xray`]: scalar, attenuated and non-abelian geodesic X-ray transforms
//!   plus regularized variational inversion.
//! - [`dbar`]: Cauchy-transform machinery for scalar and matrix d-bar
//!   equations, holomorphic boundary extension and winding numbers.
//! - [`beams`]: Gaussian-beam quasimodes (Riccati phase, amplitude transport,
//!   gluing, residual/concentration measurements) and CGO assembly.
//! - [`dnmap`]: discrete connection Laplacians on 3-D grids, Dirichlet
//!   solves, DN maps, integral-identity and Carleman probes.
//! - [`recovery`]: the Fourier-moment pipeline recovering `d(A2 - A1)` from
//!   attenuated ray data and the flat-case gauge conclusion.
//!
//! Everything is desk-scale by design: surfaces are single-chart and 2-D,
//! bundles are trivial of rank 1..=3, and grids are a few dozen cells per
//! axis. Values are immutable once constructed; bulk work (ray fans, plane
//! solves, tau sweeps) is data-parallel with deterministic reduction order.

pub mod beams;
pub mod bundle;
pub mod config;
pub mod dbar;
pub mod dnmap;
pub mod expr;
pub mod geometry;
pub mod recovery;
pub mod util;
pub mod xray;

pub use num_complex::Complex64;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("gauge error: {0}")]
    Gauge(String),
    #[error("loop error: {0}")]
    Loop(String),
    #[error("chart width too large: {0} (try delta' <= {1})")]
    ChartWidth(String, f64),
    #[error("unsupported mode: {0}")]
    Unsupported(String),
    #[error("trapped geodesic: {0}")]
    Trapped(String),
    #[error("d-bar solve failed: {0}")]
    Dbar(String),
    #[error("winding number ill-posed: {0}")]
    Winding(String),
    #[error("boundary trace not holomorphically extendable: worst moment {0:.3e}")]
    NotExtendable(f64),
    #[error("grid error: {0}")]
    Grid(String),
    #[error("solver did not converge: {0}")]
    Conditioning(String),
    #[error("support leakage: {0}")]
    Support(String),
    #[error("velocity dependence {0:.3e} above tolerance {1:.3e}")]
    VelocityDependent(f64, f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
