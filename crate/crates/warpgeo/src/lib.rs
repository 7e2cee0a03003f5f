//! Numerical toolkit for the warped products `S² ×_f S¹` with metrics
//! `dr² + sin²r dθ² + f(r)² dφ²`, a sequence of smooth warps increasing to a
//! warp that blows up logarithmically over the poles.
//!
//! Distances are reported as certified brackets: closed-form comparison
//! metrics give lower bounds, explicit measured curves give upper bounds.

pub mod convergence;
pub mod curve;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod measure;
pub mod quadrature;
pub mod refine;
pub mod sample;
pub mod solver;

pub use error::{GeoError, Result};
