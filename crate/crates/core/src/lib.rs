//! Numerical toolkit for divergence-measure fields over sets of finite
//! perimeter.
//!
//! Sets are sampled on uniform grids, smoothed by mollification, and
//! approximated from one side by super-level sets `A = {u > t}` of the
//! mollified indicator. Surface integrals over those level sets converge to
//! the interior and exterior normal traces of a bounded field, which is what
//! the Gauss-Green, jump and Cauchy-flux checks in this crate are built on.
//!
//! Module map:
//!
//! * [`grid`]: uniform grids, shapes, rasterization, mollification.
//! * [`geometry`]: level-set extraction, perimeter, densities, coarea.
//! * [`measures`]: signed measures with AC, surface and atomic parts.
//! * [`fields`]: divergence-measure fields and their divergences.
//! * [`traces`]: normal traces and the checks built on them.
//! * [`flux`]: Cauchy fluxes, slice reconstruction, production measures.
//! * [`conservation`]: scalar conservation laws and entropy dissipation.

pub mod conservation;
pub mod error;
pub mod fields;
pub mod flux;
pub mod geometry;
pub mod grid;
pub mod measures;
pub mod numerics;
pub mod point;
pub mod report;
pub mod traces;

pub use error::{Error, Result};
