//! Certified covering criteria for stable intersections of dynamically defined
//! Cantor sets in R^d and C^d.

pub mod affine;
pub mod cantor;
pub mod constructions;
pub mod covering;
pub mod lab;
pub mod limit;
pub mod matrix;
pub mod polytope;
pub mod renorm;
pub mod scalar;
pub mod smooth;
pub mod symbolic;
