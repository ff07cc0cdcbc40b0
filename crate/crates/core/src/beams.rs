//! Gaussian-beam quasimodes along non-tangential geodesics: Riccati phase,
//! amplitude transport through d-bar solves, partition-of-unity gluing,
//! residual and concentration measurements, and CGO assembly.

pub mod amplitude;
pub mod cgo;
pub mod quasimode;
pub mod riccati;

pub use amplitude::{amplitude_build, BeamAmplitude, TubeData};
pub use quasimode::{Beam, BeamPair, QuasimodeParams};
pub use riccati::{riccati_solve, BeamPhase};
