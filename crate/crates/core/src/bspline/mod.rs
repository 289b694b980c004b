//! Univariate B-spline bases, tensor-product surfaces, and the collocation
//! (design) matrices used by the least-squares solvers.

mod dataset;
mod design;
mod knots;
mod surface;

pub use dataset::{Dataset, ScatteredData, StructuredData};
pub use design::{design_matrix, design_matrix_scattered, design_matrix_structured, DesignMatrix};
pub use knots::{eval_basis_1d, make_clamped_knots, make_uniform_knots, KnotVector};
pub(crate) use surface::eval_surface_into;
pub use surface::{eval_surface, expand_closed_u, ControlNet, SurfaceSpec};
