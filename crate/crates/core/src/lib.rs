//! Contiguous cartograms from integral images of a density texture.
//!
//! The pipeline is: normalize a polygonal map into the unit square,
//! rasterize region labels, build a piecewise-constant density, compute
//! straight and 45°-tilted integral images, evaluate the anchor-point
//! mapping, and advect the polygon vertices through the residual field.
//! Repeating this drives every region toward an area proportional to its
//! statistic.

pub mod commands;
pub mod det;
pub mod engine;
pub mod error;
pub mod exec;
pub mod geo;
pub mod inim;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod synth;
pub mod temporal;

pub use error::{Error, Result};
pub use exec::Exec;
