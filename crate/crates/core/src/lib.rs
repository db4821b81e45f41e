//! Fedosov-type deformation quantization of fractional Lagrange geometries
//! with signomial coefficient fields.

// Tensor contractions read best as explicit index loops, and `!(x > 0.0)`
// is the NaN-rejecting form of a positivity test.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod caputo_oracle;
pub mod chern;
pub mod configs;
pub mod expr;
pub mod fedosov;
pub mod forms;
pub mod geometry;
pub mod wick;

pub use expr::{AlphaContext, ExprError, Signomial};
pub use geometry::{Geometry, GeometryError, LagrangianSpec};
