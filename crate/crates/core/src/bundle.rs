//! Unitary connections on trivial bundles `(R x M0) x C^m`: curvature,
//! gauge actions, parallel transport, holonomy, the boundary normal gauge
//! and holonomy-based reconstruction of gauges between flat connections.

pub mod connection;
pub mod flat;
pub mod gauge;
pub mod transport;

pub use connection::{ConnectionField, GaugeField, PotentialField};
pub use flat::{flat_gauge_reconstruct, FlatGaugeOutcome, HolonomyMismatch};
pub use gauge::{gauge_pushforward, normal_gauge};
pub use transport::{curvature, holonomy, parallel_transport, Path3};
