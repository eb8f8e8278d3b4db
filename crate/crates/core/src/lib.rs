//! Numerical toolkit for Collet-Eckmann rational maps: critical-orbit growth
//! constants, shrinking-neighbourhood pullbacks and good times, porosity
//! scans of planar sets and box-counting dimension with the combinatorial
//! bound for box mean porous sets.

pub mod dimension;
pub mod dynamics;
pub mod error;
pub mod julia;
pub mod poly;
pub mod porosity;
pub mod pullback;
pub mod sphere;

pub use error::{Error, Result};
pub use sphere::{chordal_dist, RationalMap, SpherePoint};
