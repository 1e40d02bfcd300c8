//! Numerical laboratory for the prescribed mean curvature equation
//! `div(Du / sqrt(1 + |Du|^2)) = H` on planar raster domains.

pub mod error;
pub mod extremality;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod scenario;
pub mod solver;
pub mod stencil;
pub mod traces;

pub use error::{Error, Result};
pub use grid::{Grid, Point, ScalarField, VectorField};
