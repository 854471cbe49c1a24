//! Energy-minimizing maps into the complement of a compact obstacle.
//!
//! The crate bundles the pieces needed to experiment with such maps on a
//! desk scale: obstacle geometry (signed distance, nearest-point projection,
//! second fundamental form, outward-ray checks), discrete map fields with
//! their Dirichlet energy, a projected-gradient solver, one-dimensional
//! radial reductions with a closed form, polyline geodesics around planar
//! obstacles, and the diagnostic instruments used to study free boundaries:
//! coincidence sets, Almgren frequency, critical scales, doubling and
//! reverse Holder constants, Caccioppoli ratios, and rank fields.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod radial;
pub mod solver;
pub(crate) mod quad;

pub use error::{Error, Result};
