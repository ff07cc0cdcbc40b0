//! Geodesic X-ray transforms on the transversal surface: scalar and
//! attenuated line integrals, ridge-regularized variational inversion, and
//! the non-abelian transport reduction on `R x SM0`.

pub mod invert;
pub mod nonabelian;
pub mod transform;

pub use invert::{split_one_form, xray_invert, InversionResult, RayMeasurement};
pub use nonabelian::{
    gauge_from_velocity_independent, velocity_dependence, NonabelianTransport, VelocityField,
};
pub use transform::{attenuated_ray, xray_scalar};
