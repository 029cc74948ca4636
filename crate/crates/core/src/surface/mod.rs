//! Geometry of doubly periodic immersions sampled on uniform grids.

pub mod calculus;
pub mod fd;
pub mod geometry;
pub mod grid;
pub mod immersion;

pub use calculus::*;
pub use geometry::{geometry_field, GeometryField};
pub use grid::Grid;
pub use immersion::{Immersion, Jet, SurfaceKind};
