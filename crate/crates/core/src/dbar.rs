//! Cauchy-transform machinery on the `(x1, r)` plane: scalar and matrix
//! d-bar solvers, holomorphic boundary extension tests, Plemelj extension
//! and argument-principle winding numbers.

pub mod boundary;
pub mod cauchy;
pub mod matrix;
pub mod plane;

pub use boundary::{
    holomorphic_boundary_test, winding_number, BoundaryTrace, MomentTable, PlemeljExtension,
};
pub use cauchy::{cauchy_transform, solve_dbar_scalar, CauchyOp};
pub use matrix::{solve_dbar_matrix, solve_dpartial_matrix, DbarSolution};
pub use plane::PlaneField;
