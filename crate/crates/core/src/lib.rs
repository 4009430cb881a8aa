//! Distributionally robust conditional risk minimization over union-ball
//! optimal-transport ambiguity sets.
//!
//! The pipeline: [`geometry`] partitions samples against a covariate
//! neighborhood, [`ambiguity`] turns the partition into an admissible
//! polyhedron over `(p, delta)`, [`reformulations`] compiles a risk functional
//! into a [`conic::ConicProgram`], and [`cutting_plane`] handles distortion
//! risk at scale. [`experiments`] reproduces the portfolio study.

pub mod ambiguity;
pub mod conic;
pub mod cutting_plane;
pub mod distortion;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod loss;
pub mod reformulations;
pub mod norms;
pub mod par;

pub use error::{Error, Result};
pub use norms::Norm;
