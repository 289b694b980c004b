//! Robust tensor-product B-spline regression by maximum-entropy weighted
//! least squares, with synthetic benchmarks and image-restoration tools.

pub mod bspline;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod image;
pub mod mewls;
pub mod wls;

pub use error::{Error, Result};
