//! Transversal surfaces, geodesic flow, boundary sampling and the Fermi and
//! geodesic-polar charts used by the beam and CGO constructions.

pub mod fermi;
pub mod geodesic;
pub mod polar;
pub mod sample;
pub mod surface;

pub use fermi::FermiChart;
pub use geodesic::{geodesic_trace, GeodesicPath};
pub use polar::PolarChart;
pub use sample::boundary_sample;
pub use surface::{Boundary, Surface, SurfaceKind};
