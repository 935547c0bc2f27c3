//! Solvers for coupled surface and grain-boundary motion in the quarter-loop
//! bicrystal geometry.
//!
//! Two parametric formulations drive the coupled motion — a fully parabolic
//! system and a partial differential-algebraic (PDAE) system with an
//! equidistribution constraint — next to a Cartesian height-function
//! formulation used as an independent cross-check while the surfaces stay
//! single-valued. A Laplace-domain analyzer assembles the linearized junction
//! condition matrices and scans their determinants for well-posedness.
//!
//! Data-parallel inner loops (Jacobian columns, determinant grids, study
//! levels) run on rayon when the default `parallel` feature is enabled and
//! fall back to sequential execution without it.

pub mod cartesian;
pub mod closed;
pub mod curve;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod newton;
pub mod par;
pub mod parabolic;
pub mod pdae;
pub mod snapshot;
pub mod vec2;
pub mod wellposed;

pub use error::{Error, Result};
pub use vec2::Vec2;
