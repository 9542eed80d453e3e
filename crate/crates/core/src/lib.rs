//! Simulation and measurement of windings of planar Brownian paths.
//!
//! The crate is organised bottom-up:
//!
//! - [`paths`]: seeded Brownian paths, closures and equal-time pieces.
//! - [`winding`]: exact integer winding numbers, pointwise and on grids.
//! - [`regions`]: areas and measures of large-winding sets.
//! - [`intersection`]: kernel estimates of mutual intersection local time.
//! - [`analytic`]: heat kernel, limit densities and winding tail probabilities.
//! - [`transport`]: the origin-normalised 1-Wasserstein distance.
//! - [`harness`]: configuration, experiments and report emission.

pub mod analytic;
pub mod error;
pub mod geom;
pub mod harness;
pub mod intersection;
pub mod measure;
pub mod paths;
pub mod quadrature;
pub mod regions;
pub mod special;
pub mod sum;
pub mod transport;
pub mod winding;

pub use error::{Error, Result};
pub use geom::Point;
pub use measure::MeasureAtoms;
pub use paths::{ClosedCurve, PieceSet, PlanarPath};
